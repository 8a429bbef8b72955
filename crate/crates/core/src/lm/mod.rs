//! Autoregressive scoring contract and the shipped backends.
//!
//! Every backend maps a context (a token-id sequence) to a dense
//! [`Distribution`] over one shared [`Vocabulary`]. Backends:
//!
//! * [`NgramModel`]: interpolated (Jelinek-Mercer) n-gram model with a
//!   uniform floor, so every token has non-zero mass in every context.
//! * [`TriggerModel`]: long-range co-occurrence model that lets a value slot
//!   condition on words far back in the context.
//! * [`HybridModel`]: fixed mixture of the two; this is what the pipeline
//!   trains for both the few-shot and the zero-shot roles.
//! * `RemoteLmClient` (feature `remote`): scores through an HTTP endpoint.

mod dist;
mod hybrid;
mod ngram;
#[cfg(feature = "remote")]
mod remote;
mod trigger;
mod vocab;

use std::sync::Arc;

use thiserror::Error;

pub use dist::{Distribution, DIST_TOLERANCE};
pub use hybrid::{Combine, EovAdapter, HybridModel};
pub use ngram::{train_ngram, NgramModel, NgramTrainer, Smoothing};
#[cfg(feature = "remote")]
pub use remote::RemoteLmClient;
pub use remote_protocol::{complete_sparse, ScoreRequest, ScoreResponse};
pub use trigger::{TriggerModel, TriggerTrainer};
pub use vocab::{detokenize, split_words, tokenize, TokenId, Vocabulary, BOS, EOS, EOV, UNK};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("scoring failed at {endpoint} (context length {context_len}): {message}")]
    Remote {
        endpoint: String,
        context_len: usize,
        message: String,
    },
    #[error("token {0} is outside the model vocabulary")]
    TokenOutOfRange(TokenId),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("cannot score an empty sequence")]
    EmptySequence,
}

/// An autoregressive next-token scorer over a fixed vocabulary.
pub trait LanguageModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Distribution of the next token given `context`.
    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError>;
}

impl<M: LanguageModel + ?Sized> LanguageModel for Arc<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        (**self).next_token_dist(context)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        (**self).next_token_dist(context)
    }
}

pub fn next_token_dist<M: LanguageModel + ?Sized>(
    model: &M,
    context: &[TokenId],
) -> Result<Distribution, ScoreError> {
    model.next_token_dist(context)
}

/// Chain-rule log-probability of `tokens`, each conditioned on the tokens
/// before it. Returns `-inf` as soon as one factor is zero.
pub fn score_sequence<M: LanguageModel + ?Sized>(
    model: &M,
    tokens: &[TokenId],
) -> Result<f64, ScoreError> {
    score_continuation(model, &[], tokens)
}

/// Log-probability of `continuation` given a fixed `prefix`.
pub fn score_continuation<M: LanguageModel + ?Sized>(
    model: &M,
    prefix: &[TokenId],
    continuation: &[TokenId],
) -> Result<f64, ScoreError> {
    if prefix.is_empty() && continuation.is_empty() {
        return Err(ScoreError::EmptySequence);
    }
    let mut ctx = prefix.to_vec();
    let mut total = 0.0;
    for &t in continuation {
        let p = model.next_token_dist(&ctx)?.prob(t);
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += p.ln();
        ctx.push(t);
    }
    Ok(total)
}

/// Wire types of the remote scoring protocol (`POST /score`).
pub mod remote_protocol {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Serialize};

    use super::{Distribution, ScoreError, TokenId};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ScoreRequest {
        pub context: Vec<String>,
        pub top_k: usize,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ScoreResponse {
        pub probs: BTreeMap<String, f64>,
    }

    /// Turns a possibly sparse response into a full distribution.
    ///
    /// Listed tokens keep their probability; the residual `1 - sum(listed)` is
    /// spread uniformly over the unlisted tokens. Listed strings that do not
    /// resolve through `lookup` have their mass added to `unk`. A response
    /// covering the whole vocabulary must already sum to one.
    pub fn complete_sparse(
        probs: &BTreeMap<String, f64>,
        vocab_size: usize,
        unk: TokenId,
        lookup: impl Fn(&str) -> Option<TokenId>,
    ) -> Result<Distribution, ScoreError> {
        const SLACK: f64 = 1e-6;
        let mut dense = vec![0.0; vocab_size];
        let mut listed = vec![false; vocab_size];
        let mut mass = 0.0;
        for (token, &p) in probs {
            if !p.is_finite() || p < 0.0 {
                return Err(ScoreError::InvalidDistribution(format!(
                    "probability {p} for token `{token}`"
                )));
            }
            let id = lookup(token).unwrap_or(unk);
            if id.index() >= vocab_size {
                return Err(ScoreError::TokenOutOfRange(id));
            }
            dense[id.index()] += p;
            listed[id.index()] = true;
            mass += p;
        }
        if mass > 1.0 + SLACK {
            return Err(ScoreError::InvalidDistribution(format!(
                "listed probabilities sum to {mass}"
            )));
        }
        let unlisted = listed.iter().filter(|l| !**l).count();
        let residual = (1.0 - mass).max(0.0);
        if unlisted == 0 {
            if residual > SLACK {
                return Err(ScoreError::InvalidDistribution(format!(
                    "full response sums to {mass}"
                )));
            }
        } else {
            let share = residual / unlisted as f64;
            for (p, l) in dense.iter_mut().zip(&listed) {
                if !l {
                    *p = share;
                }
            }
        }
        Distribution::normalized(dense)
    }
}
