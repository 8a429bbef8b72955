use serde::{Deserialize, Serialize};

use super::{ScoreError, TokenId};

/// Absolute tolerance on the total mass of a [`Distribution`].
pub const DIST_TOLERANCE: f64 = 1e-9;

/// Dense probability vector over a vocabulary, one entry per token id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Wraps `probs` after checking non-negativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self, ScoreError> {
        check(&probs)?;
        Ok(Distribution(probs))
    }

    /// Divides `weights` by their sum. Fails on an empty, negative, non-finite
    /// or all-zero input.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self, ScoreError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScoreError::InvalidDistribution(
                "negative or non-finite weight".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ScoreError::InvalidDistribution("zero total mass".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Distribution(weights))
    }

    pub fn uniform(size: usize) -> Self {
        Distribution(vec![1.0 / size as f64; size])
    }

    /// Unchecked constructor for callers that built the vector by a convex
    /// combination of valid distributions.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(check(&probs).is_ok(), "{:?}", check(&probs));
        Distribution(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, t: TokenId) -> f64 {
        self.0.get(t.index()).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Highest-probability token; ties go to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    }

    /// The `k` most probable tokens, ties by lowest id.
    pub fn top_k(&self, k: usize) -> Vec<(TokenId, f64)> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(k)
            .map(|i| (TokenId(i as u32), self.0[i]))
            .collect()
    }

    /// Largest and second-largest entries.
    pub fn top_two(&self) -> (f64, f64) {
        let mut first = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &p in &self.0 {
            if p > first {
                second = first;
                first = p;
            } else if p > second {
                second = p;
            }
        }
        (first, second)
    }

    /// Checks the distribution invariants.
    pub fn validate(&self) -> Result<(), ScoreError> {
        check(&self.0)
    }
}

fn check(probs: &[f64]) -> Result<(), ScoreError> {
    if probs.is_empty() {
        return Err(ScoreError::InvalidDistribution("empty".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(ScoreError::InvalidDistribution(format!("entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > DIST_TOLERANCE {
        return Err(ScoreError::InvalidDistribution(format!("sums to {total}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        let d = Distribution::new(vec![0.25, 0.25, 0.5, 0.0]).unwrap();
        assert_eq!(d.argmax(), TokenId(2));
        let d = Distribution::new(vec![0.4, 0.2, 0.4]).unwrap();
        assert_eq!(d.argmax(), TokenId(0));
        assert_eq!(d.top_k(2), vec![(TokenId(0), 0.4), (TokenId(2), 0.4)]);
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn top_two_handles_ties() {
        let d = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(d.top_two(), (0.5, 0.5));
    }
}
