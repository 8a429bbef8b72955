//! Semantic parsing by sequential prompt filling.
//!
//! A query is split into clauses. Each clause has a natural-language prompt
//! whose slot is filled by decoding two language models together: a few-shot
//! model trained on clause-annotated examples, and a zero-shot model whose
//! distribution is renormalised onto the tokens a candidate trie allows. The
//! filled prompts are mapped to SQL clauses and composed into the query.

pub mod constraint;
pub mod decode;
pub mod error;
pub mod eval;
pub mod grammar;
pub mod lm;
pub mod pipeline;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order follows input order.
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
