use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Distribution, LanguageModel, ScoreError, TokenId};
use crate::error::{Error, Result};

/// Interpolation weights `[uniform, unigram, bigram, ...]`, one per order
/// `0..=order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Smoothing(Vec<f64>);

impl Smoothing {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Config(
                "smoothing needs a weight for order 0 and at least one n-gram order".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(
                "smoothing weights must be non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "smoothing weights must sum to 1, got {total}"
            )));
        }
        Ok(Smoothing(weights))
    }

    /// Default weights for an `order`-gram model: 0.05 on the uniform floor,
    /// 0.25 on unigrams and the remaining 0.70 shared evenly by orders
    /// `2..=order`. A unigram model puts 0.95 on unigrams.
    pub fn default_for(order: usize) -> Self {
        assert!(order >= 1, "order must be at least 1");
        let mut w = vec![0.05];
        if order == 1 {
            w.push(0.95);
        } else {
            w.push(0.25);
            let share = 0.70 / (order - 1) as f64;
            w.extend(std::iter::repeat_n(share, order - 1));
        }
        Smoothing(w)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn floor_weight(&self) -> f64 {
        self.0[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Continuations {
    total: u64,
    next: HashMap<TokenId, u64>,
}

/// Interpolated n-gram model.
///
/// `P(w | h) = l0 / |V| + sum_k lk * c(h_k, w) / c(h_k)`, where `h_k` is the
/// last `k - 1` tokens of the context. When `h_k` was never observed (or the
/// context is too short) its weight passes down to order `k - 1`, so the
/// output always sums to one and every token keeps at least `l0 / |V|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NgramRepr", into = "NgramRepr")]
pub struct NgramModel {
    vocab_size: usize,
    smoothing: Smoothing,
    /// `tables[k]` holds counts for contexts of length `k`.
    tables: Vec<HashMap<Vec<TokenId>, Continuations>>,
}

#[derive(Serialize, Deserialize)]
struct NgramRepr {
    vocab_size: usize,
    smoothing: Smoothing,
    /// Per context length: `(context, [(token, count)])`, sorted.
    tables: Vec<Vec<(Vec<TokenId>, Vec<(TokenId, u64)>)>>,
}

impl From<NgramModel> for NgramRepr {
    fn from(m: NgramModel) -> Self {
        let tables = m
            .tables
            .into_iter()
            .map(|table| {
                let mut rows: Vec<_> = table
                    .into_iter()
                    .map(|(ctx, cont)| {
                        let mut next: Vec<_> = cont.next.into_iter().collect();
                        next.sort();
                        (ctx, next)
                    })
                    .collect();
                rows.sort();
                rows
            })
            .collect();
        NgramRepr {
            vocab_size: m.vocab_size,
            smoothing: m.smoothing,
            tables,
        }
    }
}

impl From<NgramRepr> for NgramModel {
    fn from(r: NgramRepr) -> Self {
        let tables = r
            .tables
            .into_iter()
            .map(|rows| {
                rows.into_iter()
                    .map(|(ctx, next)| {
                        let total = next.iter().map(|(_, c)| c).sum();
                        (
                            ctx,
                            Continuations {
                                total,
                                next: next.into_iter().collect(),
                            },
                        )
                    })
                    .collect()
            })
            .collect();
        NgramModel {
            vocab_size: r.vocab_size,
            smoothing: r.smoothing,
            tables,
        }
    }
}

/// Accumulates n-gram counts.
#[derive(Debug, Clone)]
pub struct NgramTrainer {
    vocab_size: usize,
    order: usize,
    tables: Vec<HashMap<Vec<TokenId>, Continuations>>,
    observed: u64,
}

impl NgramTrainer {
    pub fn new(vocab_size: usize, order: usize) -> Self {
        NgramTrainer {
            vocab_size,
            order,
            tables: vec![HashMap::new(); order],
            observed: 0,
        }
    }

    /// Counts every position of `seq` as a prediction target.
    pub fn add_sequence(&mut self, seq: &[TokenId]) {
        self.add_targets(seq, 0);
    }

    /// Counts only positions `first_target..` as targets; earlier tokens serve
    /// as conditioning context. This is teacher forcing restricted to the
    /// value span of a training record.
    pub fn add_targets(&mut self, seq: &[TokenId], first_target: usize) {
        for pos in first_target..seq.len() {
            let target = seq[pos];
            for k in 0..self.order.min(pos + 1) {
                let ctx = seq[pos - k..pos].to_vec();
                let cont = self.tables[k].entry(ctx).or_default();
                cont.total += 1;
                *cont.next.entry(target).or_insert(0) += 1;
            }
            self.observed += 1;
        }
    }

    pub fn finish(self, smoothing: Smoothing) -> Result<NgramModel> {
        if smoothing.order() != self.order {
            return Err(Error::Config(format!(
                "smoothing has {} weights but the model order is {}",
                smoothing.weights().len(),
                self.order
            )));
        }
        if self.observed == 0 {
            return Err(Error::Config(
                "cannot train an n-gram model on an empty corpus".into(),
            ));
        }
        for table in &self.tables {
            for cont in table.values() {
                for t in cont.next.keys() {
                    if t.index() >= self.vocab_size {
                        return Err(Error::Config(format!(
                            "corpus token {t} outside vocabulary of size {}",
                            self.vocab_size
                        )));
                    }
                }
            }
        }
        Ok(NgramModel {
            vocab_size: self.vocab_size,
            smoothing,
            tables: self.tables,
        })
    }
}

/// Trains an interpolated n-gram model over `corpus`.
pub fn train_ngram(
    corpus: &[Vec<TokenId>],
    vocab_size: usize,
    order: usize,
    smoothing: Smoothing,
) -> Result<NgramModel> {
    if order == 0 {
        return Err(Error::Config("n-gram order must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Config(
            "cannot train an n-gram model on an empty corpus".into(),
        ));
    }
    let mut trainer = NgramTrainer::new(vocab_size, order);
    for seq in corpus {
        trainer.add_sequence(seq);
    }
    trainer.finish(smoothing)
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.tables.len()
    }

    pub fn smoothing(&self) -> &Smoothing {
        &self.smoothing
    }

    /// Count of `token` after exactly `context` (which must be shorter than
    /// the order).
    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.tables
            .get(context.len())
            .and_then(|t| t.get(context))
            .and_then(|c| c.next.get(&token))
            .copied()
            .unwrap_or(0)
    }
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        if let Some(&t) = context.iter().find(|t| t.index() >= self.vocab_size) {
            return Err(ScoreError::TokenOutOfRange(t));
        }
        let weights = self.smoothing.weights();
        let mut probs = vec![weights[0] / self.vocab_size as f64; self.vocab_size];
        let mut carry = 0.0;
        for k in (1..=self.order()).rev() {
            let lambda = weights[k] + carry;
            carry = 0.0;
            let ctx_len = k - 1;
            let found = (context.len() >= ctx_len)
                .then(|| self.tables[ctx_len].get(&context[context.len() - ctx_len..]))
                .flatten();
            match found {
                Some(cont) if cont.total > 0 => {
                    let scale = lambda / cont.total as f64;
                    for (&t, &c) in &cont.next {
                        probs[t.index()] += scale * c as f64;
                    }
                }
                _ => carry = lambda,
            }
        }
        // The unigram table is non-empty for any trained model, so nothing is
        // left to carry here.
        debug_assert_eq!(carry, 0.0);
        Distribution::new(probs)
    }
}
