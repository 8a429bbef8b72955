use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Distribution, LanguageModel, ScoreError, TokenId};

/// Long-range co-occurrence ("trigger pair") model.
///
/// Each context token `c` seen as a trigger during training carries a
/// conditional `t(w | c)` and a weight `ln(N / df(c))`, where `df(c)` counts
/// the training contexts containing `c`. The next-token distribution is the
/// weighted average of these conditionals over the distinct known triggers in
/// the context, mixed with a uniform floor; a context with no weighted trigger
/// yields the uniform distribution. Tokens present in every training context
/// (prompt words) therefore carry nothing. Training fits `t` by
/// expectation-maximisation on exactly that averaged likelihood (IBM Model 1
/// with a fixed alignment prior), so each target ends up attributed to the
/// triggers that single it out rather than to every word nearby.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerModel {
    vocab_size: usize,
    floor: f64,
    #[serde(default)]
    specials: u32,
    weights: HashMap<TokenId, f64>,
    table: HashMap<TokenId, Vec<(TokenId, f64)>>,
    /// Context-free target distribution (floor included).
    prior: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TriggerTrainer {
    vocab_size: usize,
    specials: u32,
    /// (trigger set, target) training events
    events: Vec<(Vec<TokenId>, TokenId)>,
    /// contexts containing each trigger
    df: HashMap<TokenId, usize>,
    docs: usize,
    null_weight: f64,
}

/// Key of the always-present empty trigger during training.
const NULL: TokenId = TokenId(u32::MAX);

impl TriggerTrainer {
    /// `specials` leading ids (the vocabulary markers) are ignored both as
    /// triggers and as targets; where a sequence ends is left to the n-gram
    /// side.
    pub fn new(vocab_size: usize, specials: u32) -> Self {
        TriggerTrainer {
            vocab_size,
            specials,
            events: Vec::new(),
            df: HashMap::new(),
            docs: 0,
            null_weight: 0.0,
        }
    }

    /// Adds an empty trigger of weight `w` to every training event. It soaks
    /// up targets that no context word explains (punctuation, operators) and
    /// is dropped once training ends, so the fitted conditionals only carry
    /// what the context actually predicts.
    pub fn with_null_weight(mut self, w: f64) -> Self {
        self.null_weight = w.max(0.0);
        self
    }

    fn count_doc(&mut self, triggers: &BTreeSet<TokenId>) {
        self.docs += 1;
        for c in triggers {
            *self.df.entry(*c).or_insert(0) += 1;
        }
    }

    /// Every token of `seq` is a target triggered by the distinct tokens
    /// before it. The sentence counts as one context.
    pub fn add_sentence(&mut self, seq: &[TokenId]) {
        let mut seen = BTreeSet::new();
        for (i, &t) in seq.iter().enumerate() {
            if i > 0 && seq[i - 1].0 >= self.specials {
                seen.insert(seq[i - 1]);
            }
            if !seen.is_empty() && t.0 >= self.specials {
                self.events.push((seen.iter().copied().collect(), t));
            }
        }
        let all: BTreeSet<TokenId> = seq
            .iter()
            .copied()
            .filter(|c| c.0 >= self.specials)
            .collect();
        self.count_doc(&all);
    }

    /// Every target is triggered by the distinct tokens of `context` only.
    pub fn add_record(&mut self, context: &[TokenId], targets: &[TokenId]) {
        let set: BTreeSet<TokenId> = context
            .iter()
            .copied()
            .filter(|c| c.0 >= self.specials)
            .collect();
        self.count_doc(&set);
        if set.is_empty() {
            return;
        }
        let triggers: Vec<TokenId> = set.into_iter().collect();
        for &t in targets.iter().filter(|t| t.0 >= self.specials) {
            self.events.push((triggers.clone(), t));
        }
    }

    /// Fits the conditionals with `iterations` EM rounds, starting from
    /// plain co-occurrence frequencies.
    pub fn finish(self, floor: f64, iterations: usize) -> TriggerModel {
        let v = self.vocab_size as f64;
        let floor = floor.clamp(0.0, 1.0);
        let mut prior = vec![floor / v; self.vocab_size];
        for (_, t) in &self.events {
            prior[t.index()] += (1.0 - floor) / self.events.len() as f64;
        }
        if self.events.is_empty() {
            prior = vec![1.0 / v; self.vocab_size];
        }
        let n = self.docs as f64;
        let mut weights: HashMap<TokenId, f64> = self
            .df
            .iter()
            .map(|(c, &df)| (*c, (n / df as f64).ln()))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let null = self.null_weight > 0.0;
        if null {
            weights.insert(NULL, self.null_weight);
        }
        let events: Vec<(Vec<TokenId>, TokenId)> = self
            .events
            .into_iter()
            .map(|(cs, t)| {
                let mut cs: Vec<TokenId> =
                    cs.into_iter().filter(|c| weights.contains_key(c)).collect();
                if null {
                    cs.push(NULL);
                }
                (cs, t)
            })
            .filter(|(cs, _)| !cs.is_empty())
            .collect();
        let mut counts: HashMap<TokenId, HashMap<TokenId, f64>> = HashMap::new();
        for (triggers, t) in &events {
            for c in triggers {
                *counts.entry(*c).or_default().entry(*t).or_insert(0.0) += 1.0;
            }
        }
        let mut table = normalize(counts);
        for _ in 0..iterations {
            let mut counts: HashMap<TokenId, HashMap<TokenId, f64>> = HashMap::new();
            for (triggers, t) in &events {
                let denom: f64 = triggers.iter().map(|c| weights[c] * table[c][t]).sum();
                if denom <= 0.0 {
                    continue;
                }
                for c in triggers {
                    let r = weights[c] * table[c][t] / denom;
                    *counts.entry(*c).or_default().entry(*t).or_insert(0.0) += r;
                }
            }
            table = normalize(counts);
        }
        table.remove(&NULL);
        weights.remove(&NULL);
        let table = table
            .into_iter()
            .map(|(c, row)| {
                let mut row: Vec<(TokenId, f64)> =
                    row.into_iter().filter(|(_, p)| *p > 0.0).collect();
                row.sort_by_key(|(t, _)| *t);
                (c, row)
            })
            .collect();
        TriggerModel {
            vocab_size: self.vocab_size,
            floor,
            specials: self.specials,
            weights,
            table,
            prior,
        }
    }
}

fn normalize(
    counts: HashMap<TokenId, HashMap<TokenId, f64>>,
) -> HashMap<TokenId, HashMap<TokenId, f64>> {
    counts
        .into_iter()
        .map(|(c, mut row)| {
            let total: f64 = row.values().sum();
            if total > 0.0 {
                row.values_mut().for_each(|v| *v /= total);
            }
            (c, row)
        })
        .collect()
}

impl TriggerModel {
    pub fn trigger_count(&self) -> usize {
        self.table.len()
    }

    /// Number of leading ids the model never predicts or conditions on.
    pub fn specials(&self) -> u32 {
        self.specials
    }

    /// Target distribution with no context: training target frequencies
    /// mixed with the same floor as the conditional distributions.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }
}

impl LanguageModel for TriggerModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        if let Some(&t) = context.iter().find(|t| t.index() >= self.vocab_size) {
            return Err(ScoreError::TokenOutOfRange(t));
        }
        let triggers: BTreeSet<TokenId> = context
            .iter()
            .copied()
            .filter(|c| self.table.contains_key(c))
            .collect();
        if triggers.is_empty() {
            return Ok(Distribution::uniform(self.vocab_size));
        }
        let v = self.vocab_size as f64;
        let total: f64 = triggers.iter().map(|c| self.weights[c]).sum();
        let mut probs = vec![self.floor / v; self.vocab_size];
        for c in &triggers {
            let share = (1.0 - self.floor) * self.weights[c] / total;
            for &(t, p) in &self.table[c] {
                probs[t.index()] += share * p;
            }
        }
        Distribution::new(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigger_pulls_toward_cooccurring_target() {
        let over = TokenId(4);
        let under = TokenId(5);
        let gt = TokenId(6);
        let lt = TokenId(7);
        let mut tr = TriggerTrainer::new(8, 4);
        tr.add_sentence(&[over, gt]);
        tr.add_sentence(&[under, lt]);
        let m = tr.finish(0.1, 5);
        let d = m.next_token_dist(&[TokenId(0), over]).unwrap();
        assert_eq!(d.argmax(), gt);
        let d = m.next_token_dist(&[under]).unwrap();
        assert_eq!(d.argmax(), lt);
    }

    #[test]
    fn unknown_context_is_uniform() {
        let m = TriggerTrainer::new(6, 4).finish(0.1, 5);
        let d = m.next_token_dist(&[TokenId(5)]).unwrap();
        assert_eq!(d, Distribution::uniform(6));
    }

    #[test]
    fn em_does_not_lower_training_likelihood() {
        // "dollar" co-occurs with both relations and also appears alone
        let (over, under, dollar, gt, lt) =
            (TokenId(4), TokenId(5), TokenId(6), TokenId(7), TokenId(8));
        let events: Vec<(Vec<TokenId>, TokenId)> = [
            (vec![over, dollar], gt),
            (vec![under, dollar], lt),
            (vec![dollar], lt),
            (vec![over], gt),
        ]
        .into_iter()
        .flat_map(|e| std::iter::repeat_n(e, 3))
        .collect();
        let mut tr = TriggerTrainer::new(9, 4);
        for (ctx, t) in &events {
            tr.add_record(ctx, &[*t]);
        }
        let ll = |m: &TriggerModel| -> f64 {
            events
                .iter()
                .map(|(ctx, t)| m.next_token_dist(ctx).unwrap().prob(*t).ln())
                .sum()
        };
        let raw = tr.clone().finish(0.0, 0);
        let mut last = ll(&raw);
        for iters in 1..6 {
            let fitted = tr.clone().finish(0.0, iters);
            let now = ll(&fitted);
            assert!(now >= last - 1e-9, "iteration {iters}: {now} < {last}");
            last = now;
        }
        let fitted = tr.finish(0.0, 5);
        assert_eq!(
            fitted.next_token_dist(&[over, dollar]).unwrap().argmax(),
            gt
        );
        assert_eq!(
            fitted.next_token_dist(&[under, dollar]).unwrap().argmax(),
            lt
        );
    }

    #[test]
    fn specials_are_not_triggers() {
        let mut tr = TriggerTrainer::new(6, 4);
        tr.add_record(&[TokenId(0), TokenId(4)], &[TokenId(5)]);
        tr.add_record(&[TokenId(0), TokenId(5)], &[TokenId(4)]);
        let m = tr.finish(0.0, 0);
        assert_eq!(m.trigger_count(), 2);
    }

    #[test]
    fn null_trigger_absorbs_unexplained_targets() {
        // every record ends in `;`, which no context word explains
        let (x, y, semi) = (TokenId(4), TokenId(5), TokenId(6));
        let mut plain = TriggerTrainer::new(7, 4);
        plain.add_record(&[x], &[x, semi]);
        plain.add_record(&[y], &[y, semi]);
        let with_null = plain.clone().with_null_weight(1.0);
        let p = plain
            .finish(0.0, 10)
            .next_token_dist(&[x])
            .unwrap()
            .prob(semi);
        let q = with_null
            .finish(0.0, 10)
            .next_token_dist(&[x])
            .unwrap()
            .prob(semi);
        assert!(q < p, "{q} !< {p}");
    }

    #[test]
    fn ubiquitous_tokens_carry_no_weight() {
        let (prompt, a, b) = (TokenId(4), TokenId(5), TokenId(6));
        let mut tr = TriggerTrainer::new(7, 4);
        tr.add_record(&[prompt, a], &[a]);
        tr.add_record(&[prompt, b], &[b]);
        tr.add_record(&[prompt, b], &[b]);
        let m = tr.finish(0.0, 3);
        assert_eq!(m.trigger_count(), 2);
        // without `prompt` diluting it, `a` is predicted outright
        assert!((m.next_token_dist(&[prompt, a]).unwrap().prob(a) - 1.0).abs() < 1e-12);
        assert_eq!(
            m.next_token_dist(&[prompt]).unwrap(),
            Distribution::uniform(7)
        );
    }
}
