//! Constrained ensemble decoding of one slot value.
//!
//! At each step the few-shot distribution (unconstrained) is mixed with the
//! zero-shot distribution renormalised onto the tokens the candidate trie
//! allows after the current prefix:
//!
//! ```text
//! zero'(w) = 1[w in V] zero(w) / sum_{v in V} zero(v)
//! P(w)     = gamma few(w) + (1 - gamma) zero'(w)
//! ```
//!
//! Decoding is greedy with ties going to the lowest token id.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::CandidateTrie;
use crate::lm::{Distribution, LanguageModel, ScoreError, TokenId};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("no candidate value can start here (step {step})")]
    ConstraintExhausted { step: usize },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("confidence is undefined when the top probability is zero")]
    UndefinedConfidence,
    #[error("uncertainty needs at least two entries, got {0}")]
    TooFewSupport(usize),
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
    #[error("distributions have different sizes ({0} and {1})")]
    SizeMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    #[default]
    Off,
    /// Margin of confidence, `1 - (p1 - p2)`.
    Moc,
    /// Ratio of confidence, `p2 / p1`.
    Roc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// Weight of the few-shot model.
    pub gamma: f64,
    pub max_len: usize,
    pub uncertainty: UncertaintyMode,
    /// Zero-shot output is kept when its uncertainty is at most this.
    pub threshold: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            gamma: 0.5,
            max_len: 32,
            uncertainty: UncertaintyMode::Off,
            threshold: 0.5,
        }
    }
}

impl EnsembleConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        EnsembleConfig {
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(DecodeError::InvalidConfig(format!(
                "gamma {} is outside [0, 1]",
                self.gamma
            )));
        }
        if self.max_len == 0 {
            return Err(DecodeError::InvalidConfig(
                "max_len must be at least 1".into(),
            ));
        }
        if !self.threshold.is_finite() {
            return Err(DecodeError::InvalidConfig(
                "threshold must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub few: Distribution,
    /// Absent when the zero-shot path was not consulted at this step.
    pub zero_rescaled: Option<Distribution>,
    pub ensembled: Distribution,
    pub chosen: TokenId,
    pub allowed: Vec<TokenId>,
    /// The zero-shot model gave no mass to any allowed token.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedValue {
    /// Value tokens, without the end-of-value marker.
    pub tokens: Vec<TokenId>,
    pub steps: Vec<StepRecord>,
    /// End-of-value was chosen (as opposed to hitting `max_len`).
    pub finished: bool,
    /// Step at which the ensemble left the trie, disabling the zero-shot path.
    pub off_trie_at: Option<usize>,
    pub fallback_steps: usize,
}

/// Restricts `dist` to `allowed` and renormalises.
///
/// Returns the rescaled distribution and whether the uniform fallback was
/// used because `dist` has no mass on `allowed`.
pub fn rescale(
    dist: &Distribution,
    allowed: &BTreeSet<TokenId>,
) -> Result<(Distribution, bool), DecodeError> {
    if allowed.is_empty() {
        return Err(DecodeError::ConstraintExhausted { step: 0 });
    }
    if let Some(&t) = allowed.iter().find(|t| t.index() >= dist.len()) {
        return Err(ScoreError::TokenOutOfRange(t).into());
    }
    let mass: f64 = allowed.iter().map(|&t| dist.prob(t)).sum();
    let mut out = vec![0.0; dist.len()];
    if mass > 0.0 {
        for &t in allowed {
            out[t.index()] = dist.prob(t) / mass;
        }
        Ok((Distribution::from_vec_unchecked(out), false))
    } else {
        let u = 1.0 / allowed.len() as f64;
        for &t in allowed {
            out[t.index()] = u;
        }
        Ok((Distribution::from_vec_unchecked(out), true))
    }
}

/// `gamma * few + (1 - gamma) * zero_rescaled`.
pub fn ensemble_step(
    few: &Distribution,
    zero_rescaled: &Distribution,
    gamma: f64,
) -> Result<Distribution, DecodeError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(DecodeError::InvalidConfig(format!(
            "gamma {gamma} is outside [0, 1]"
        )));
    }
    if few.len() != zero_rescaled.len() {
        return Err(DecodeError::SizeMismatch(few.len(), zero_rescaled.len()));
    }
    let mixed = few
        .probs()
        .iter()
        .zip(zero_rescaled.probs())
        .map(|(f, z)| gamma * f + (1.0 - gamma) * z)
        .collect();
    Ok(Distribution::from_vec_unchecked(mixed))
}

/// The zero-shot side of a decode: a model plus the trie constraining it.
#[derive(Clone, Copy)]
pub struct ZeroShot<'a> {
    pub model: &'a dyn LanguageModel,
    pub trie: &'a CandidateTrie,
}

/// Greedy decode of one slot value after `ctx`.
///
/// Without a zero-shot side, or with `gamma == 1`, this is plain few-shot
/// greedy decoding. Otherwise every step mixes in the rescaled zero-shot
/// distribution until end-of-value, `max_len`, or the first step whose
/// choice leaves the trie; after that the few-shot model finishes alone.
pub fn decode_value(
    few: &dyn LanguageModel,
    zero: Option<ZeroShot<'_>>,
    eov: TokenId,
    ctx: &[TokenId],
    cfg: &EnsembleConfig,
) -> Result<DecodedValue, DecodeError> {
    cfg.validate()?;
    if let Some(z) = zero {
        if z.model.vocab_size() != few.vocab_size() {
            return Err(DecodeError::SizeMismatch(
                few.vocab_size(),
                z.model.vocab_size(),
            ));
        }
    }
    let mut zero = zero.filter(|_| cfg.gamma < 1.0);
    let mut input = ctx.to_vec();
    let start = input.len();
    let mut out = DecodedValue {
        tokens: Vec::new(),
        steps: Vec::new(),
        finished: false,
        off_trie_at: None,
        fallback_steps: 0,
    };
    for step in 0..cfg.max_len {
        let few_d = few.next_token_dist(&input)?;
        let prefix = &input[start..];
        let (ensembled, zero_rescaled, allowed, fallback) = match zero {
            Some(z) => {
                let allowed = z.trie.allowed_tokens(prefix);
                if allowed.is_empty() {
                    return Err(DecodeError::ConstraintExhausted { step });
                }
                let (zr, fallback) = rescale(&z.model.next_token_dist(&input)?, &allowed)?;
                let ens = ensemble_step(&few_d, &zr, cfg.gamma)?;
                (ens, Some(zr), allowed, fallback)
            }
            None => (few_d.clone(), None, BTreeSet::new(), false),
        };
        let chosen = ensembled.argmax();
        if zero.is_some() && !allowed.contains(&chosen) {
            out.off_trie_at = Some(step);
            zero = None;
        }
        out.fallback_steps += usize::from(fallback);
        out.steps.push(StepRecord {
            step,
            few: few_d,
            zero_rescaled,
            ensembled,
            chosen,
            allowed: allowed.into_iter().collect(),
            fallback,
        });
        if chosen == eov {
            out.finished = true;
            break;
        }
        input.push(chosen);
        out.tokens.push(chosen);
    }
    Ok(out)
}

fn top_two(dist: &Distribution) -> Result<(f64, f64), DecodeError> {
    if dist.len() < 2 {
        return Err(DecodeError::TooFewSupport(dist.len()));
    }
    Ok(dist.top_two())
}

pub fn moc(dist: &Distribution) -> Result<f64, DecodeError> {
    let (p1, p2) = top_two(dist)?;
    Ok(1.0 - (p1 - p2))
}

pub fn roc(dist: &Distribution) -> Result<f64, DecodeError> {
    let (p1, p2) = top_two(dist)?;
    if p1 <= 0.0 {
        return Err(DecodeError::UndefinedConfidence);
    }
    Ok(p2 / p1)
}

pub fn uncertainty(dist: &Distribution, mode: UncertaintyMode) -> Result<Option<f64>, DecodeError> {
    match mode {
        UncertaintyMode::Off => Ok(None),
        UncertaintyMode::Moc => moc(dist).map(Some),
        UncertaintyMode::Roc => roc(dist).map(Some),
    }
}

/// Picks `zero_value` when the zero-shot model is confident at the first
/// value step (uncertainty at most `threshold`), else `few_value`.
pub fn select_by_uncertainty<T>(
    zero_rescaled_first: &Distribution,
    mode: UncertaintyMode,
    threshold: f64,
    few_value: T,
    zero_value: T,
) -> Result<T, DecodeError> {
    let metric = match mode {
        UncertaintyMode::Off => {
            return Err(DecodeError::InvalidConfig(
                "uncertainty selection needs MoC or RoC".into(),
            ))
        }
        UncertaintyMode::Moc => moc(zero_rescaled_first)?,
        UncertaintyMode::Roc => roc(zero_rescaled_first)?,
    };
    Ok(if metric <= threshold {
        zero_value
    } else {
        few_value
    })
}

/// Outcome of [`decode_slot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDecode {
    pub value: DecodedValue,
    /// Uncertainty of the zero-shot path at the first step, when selection
    /// was used.
    pub uncertainty: Option<f64>,
    /// Selection kept the zero-shot path's value.
    pub picked_zero: Option<bool>,
}

/// Decodes a slot under `cfg`: the per-step ensemble, or with an
/// uncertainty mode, independent few-only and zero-only decodes of which one
/// is kept.
pub fn decode_slot(
    few: &dyn LanguageModel,
    zero: Option<ZeroShot<'_>>,
    eov: TokenId,
    ctx: &[TokenId],
    cfg: &EnsembleConfig,
) -> Result<SlotDecode, DecodeError> {
    let Some(z) = zero.filter(|_| cfg.uncertainty != UncertaintyMode::Off) else {
        return Ok(SlotDecode {
            value: decode_value(few, zero, eov, ctx, cfg)?,
            uncertainty: None,
            picked_zero: None,
        });
    };
    let few_only = decode_value(
        few,
        None,
        eov,
        ctx,
        &EnsembleConfig {
            gamma: 1.0,
            ..cfg.clone()
        },
    )?;
    let zero_only = decode_value(
        few,
        Some(z),
        eov,
        ctx,
        &EnsembleConfig {
            gamma: 0.0,
            ..cfg.clone()
        },
    )?;
    let first = zero_only.steps[0]
        .zero_rescaled
        .as_ref()
        .expect("zero-only decode records the rescaled distribution");
    let metric = uncertainty(first, cfg.uncertainty)?;
    let picked_zero = select_by_uncertainty(first, cfg.uncertainty, cfg.threshold, false, true)?;
    Ok(SlotDecode {
        value: if picked_zero { zero_only } else { few_only },
        uncertainty: metric,
        picked_zero: Some(picked_zero),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn ids(v: &[u32]) -> BTreeSet<TokenId> {
        v.iter().map(|&i| TokenId(i)).collect()
    }

    #[test]
    fn rescale_uniform_over_two() {
        let (r, fb) = rescale(&Distribution::uniform(10), &ids(&[4, 7])).unwrap();
        assert!(!fb);
        assert_abs_diff_eq!(r.prob(TokenId(4)), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.prob(TokenId(7)), 0.5, epsilon = 1e-12);
        assert_eq!(r.prob(TokenId(0)), 0.0);
    }

    #[test]
    fn rescale_small_mass() {
        let mut p = vec![0.96 / 8.0; 10];
        p[0] = 0.01;
        p[1] = 0.03;
        let (r, _) = rescale(&dist(&p), &ids(&[0, 1])).unwrap();
        assert_abs_diff_eq!(r.prob(TokenId(0)), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r.prob(TokenId(1)), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn rescale_full_vocab_is_identity() {
        let d = dist(&[0.1, 0.2, 0.3, 0.4]);
        let (r, _) = rescale(&d, &ids(&[0, 1, 2, 3])).unwrap();
        for (a, b) in r.probs().iter().zip(d.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rescale_zero_mass_falls_back_to_uniform() {
        let (r, fb) = rescale(&dist(&[1.0, 0.0, 0.0]), &ids(&[1, 2])).unwrap();
        assert!(fb);
        assert_eq!(r.probs(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn rescale_empty_allowed_is_exhausted() {
        assert!(matches!(
            rescale(&dist(&[1.0]), &BTreeSet::new()),
            Err(DecodeError::ConstraintExhausted { .. })
        ));
    }

    #[test]
    fn ensemble_examples() {
        let few = dist(&[0.8, 0.2]);
        let zero = dist(&[0.3, 0.7]);
        assert_eq!(ensemble_step(&few, &zero, 1.0).unwrap(), few);
        assert_eq!(ensemble_step(&few, &zero, 0.0).unwrap(), zero);
        let mid = ensemble_step(&few, &zero, 0.5).unwrap();
        assert_abs_diff_eq!(mid.prob(TokenId(0)), 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.prob(TokenId(1)), 0.45, epsilon = 1e-12);
        assert!(ensemble_step(&few, &zero, 1.5).is_err());
    }

    #[test]
    fn moc_roc_examples() {
        let d = dist(&[0.6, 0.3, 0.1]);
        assert_abs_diff_eq!(moc(&d).unwrap(), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(roc(&d).unwrap(), 0.5, epsilon = 1e-12);
        let u = Distribution::uniform(5);
        assert_abs_diff_eq!(moc(&u).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(roc(&u).unwrap(), 1.0, epsilon = 1e-12);
        let c = dist(&[0.0, 1.0, 0.0]);
        assert_eq!(moc(&c).unwrap(), 0.0);
        assert_eq!(roc(&c).unwrap(), 0.0);
        assert!(matches!(
            moc(&dist(&[1.0])),
            Err(DecodeError::TooFewSupport(1))
        ));
    }

    #[test]
    fn selection_examples() {
        let sure = dist(&[1.0, 0.0]);
        assert_eq!(
            select_by_uncertainty(&sure, UncertaintyMode::Moc, 0.1, "few", "zero").unwrap(),
            "zero"
        );
        let unsure = Distribution::uniform(2);
        assert_eq!(
            select_by_uncertainty(&unsure, UncertaintyMode::Moc, 0.5, "few", "zero").unwrap(),
            "few"
        );
        let d = dist(&[0.8, 0.2]);
        assert_eq!(
            select_by_uncertainty(&d, UncertaintyMode::Roc, 0.3, "few", "zero").unwrap(),
            "zero"
        );
    }

    #[test]
    fn config_validation() {
        assert!(EnsembleConfig::with_gamma(-0.1).validate().is_err());
        assert!(EnsembleConfig {
            max_len: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnsembleConfig::default().validate().is_ok());
    }
}
