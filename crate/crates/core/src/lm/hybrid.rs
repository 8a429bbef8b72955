use serde::{Deserialize, Serialize};

use super::{Distribution, LanguageModel, NgramModel, ScoreError, TokenId, TriggerModel};

/// How the two component distributions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// `(1 - w) * ngram + w * trigger`
    #[default]
    Linear,
    /// Unigram rescaling: marker tokens keep their n-gram probability and the
    /// rest of the mass is shared out in proportion to
    /// `ngram * (trigger / prior)^w`, where `prior` is the trigger model's
    /// context-free distribution. Tokens the context makes no more likely than
    /// usual keep their n-gram weight.
    Rescale,
}

/// Fixed mixture of an n-gram model and an optional trigger model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub ngram: NgramModel,
    pub trigger: Option<TriggerModel>,
    pub trigger_weight: f64,
    #[serde(default)]
    pub combine: Combine,
}

impl HybridModel {
    pub fn ngram_only(ngram: NgramModel) -> Self {
        HybridModel {
            ngram,
            trigger: None,
            trigger_weight: 0.0,
            combine: Combine::Linear,
        }
    }

    pub fn new(ngram: NgramModel, trigger: TriggerModel, trigger_weight: f64) -> Self {
        HybridModel {
            ngram,
            trigger: Some(trigger),
            trigger_weight: trigger_weight.clamp(0.0, 1.0),
            combine: Combine::Linear,
        }
    }

    pub fn with_combine(mut self, combine: Combine) -> Self {
        self.combine = combine;
        self
    }
}

impl LanguageModel for HybridModel {
    fn vocab_size(&self) -> usize {
        self.ngram.vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        let base = self.ngram.next_token_dist(context)?;
        let (Some(trigger), w) = (&self.trigger, self.trigger_weight) else {
            return Ok(base);
        };
        if w == 0.0 {
            return Ok(base);
        }
        let extra = trigger.next_token_dist(context)?;
        match self.combine {
            Combine::Linear => {
                let mixed = base
                    .probs()
                    .iter()
                    .zip(extra.probs())
                    .map(|(a, b)| (1.0 - w) * a + w * b)
                    .collect();
                Ok(Distribution::from_vec_unchecked(mixed))
            }
            Combine::Rescale => {
                let specials = (trigger.specials() as usize).min(base.len());
                let (marks, words) = base.probs().split_at(specials);
                let rest = 1.0 - marks.iter().sum::<f64>();
                let lift = extra.probs()[specials..]
                    .iter()
                    .zip(&trigger.prior()[specials..]);
                let logs: Vec<f64> = words
                    .iter()
                    .zip(lift)
                    .map(|(a, (b, p))| a.ln() + w * (b / p).ln())
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = raw.iter().sum();
                let mut probs = marks.to_vec();
                probs.extend(raw.into_iter().map(|p| rest * p / total));
                Distribution::new(probs)
            }
        }
    }
}

/// Presents a plain language model as a value scorer: the model's
/// end-of-sequence mass is moved onto the end-of-value marker, so a value
/// stops where the model would end a sentence.
pub struct EovAdapter<M> {
    inner: M,
    eos: TokenId,
    eov: TokenId,
}

impl<M> EovAdapter<M> {
    pub fn new(inner: M, eos: TokenId, eov: TokenId) -> Self {
        EovAdapter { inner, eos, eov }
    }
}

impl<M: LanguageModel> LanguageModel for EovAdapter<M> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        let mut probs = self.inner.next_token_dist(context)?.into_vec();
        let moved = std::mem::take(&mut probs[self.eos.index()]);
        probs[self.eov.index()] += moved;
        Ok(Distribution::from_vec_unchecked(probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{train_ngram, Smoothing, TriggerTrainer};

    #[test]
    fn eos_mass_moves_to_eov() {
        let ng = train_ngram(
            &[vec![TokenId(4), TokenId(1)]],
            6,
            2,
            Smoothing::default_for(2),
        )
        .unwrap();
        let raw = ng.next_token_dist(&[TokenId(4)]).unwrap();
        let adapted = EovAdapter::new(&ng, TokenId(1), TokenId(3))
            .next_token_dist(&[TokenId(4)])
            .unwrap();
        assert_eq!(adapted.prob(TokenId(1)), 0.0);
        assert!(
            (adapted.prob(TokenId(3)) - raw.prob(TokenId(1)) - raw.prob(TokenId(3))).abs() < 1e-15
        );
        assert!(adapted.validate().is_ok());
    }

    #[test]
    fn hybrid_is_a_valid_mixture() {
        let ng = train_ngram(
            &[vec![TokenId(4), TokenId(5)]],
            6,
            2,
            Smoothing::default_for(2),
        )
        .unwrap();
        let mut tr = TriggerTrainer::new(6, 4);
        tr.add_sentence(&[TokenId(4), TokenId(5)]);
        let h = HybridModel::new(ng, tr.finish(0.05, 3), 0.4);
        let d = h.next_token_dist(&[TokenId(4)]).unwrap();
        assert!(d.validate().is_ok());
        assert_eq!(d.argmax(), TokenId(5));
    }
}
