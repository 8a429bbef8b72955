use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Models, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_example, Example};
use crate::grammar::ClauseId;
use crate::par_map;

/// `{0, step, 2 step, ..., 1}`; `step` must divide 1.
pub fn gamma_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!(
            "gamma step {step} must be in (0, 1]"
        )));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "gamma step {step} does not divide 1"
        )));
    }
    let n = n as usize;
    Ok((0..=n)
        .map(|k| if k == n { 1.0 } else { k as f64 / n as f64 })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSearch {
    pub gammas: BTreeMap<ClauseId, f64>,
    /// Dev accuracy of each clause at every grid point, as `(gamma, accuracy)`.
    pub accuracy: BTreeMap<ClauseId, Vec<(f64, f64)>>,
}

impl GammaSearch {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        for (id, &g) in &self.gammas {
            cfg.set_gamma(id, g);
        }
    }
}

/// Per-clause grid search of gamma on `dev`.
///
/// Clauses are tuned one at a time in generation order; when tuning a clause
/// the earlier clauses use their chosen gamma and the later ones their
/// configured gamma. The score is that clause's accuracy on `dev`, and ties
/// go to the larger gamma.
pub fn grid_search_gamma(
    dev: &[Example],
    cfg: &PipelineConfig,
    models: &Models,
    step: f64,
) -> Result<GammaSearch> {
    if dev.is_empty() {
        return Err(Error::Config(
            "gamma search needs a non-empty dev set".into(),
        ));
    }
    let grid = gamma_grid(step)?;
    let def = cfg.active_scheme();
    let mut working = cfg.clone();
    let mut out = GammaSearch {
        gammas: BTreeMap::new(),
        accuracy: BTreeMap::new(),
    };
    for (pos, spec) in def.generation_order().into_iter().enumerate() {
        let scores: Vec<Result<f64>> = par_map(&grid, |&g| {
            let mut c = working.clone();
            c.set_gamma(&spec.id, g);
            let mut right = 0usize;
            for ex in dev {
                if evaluate_example(ex, def, &c, models)?.clause_correct[pos] {
                    right += 1;
                }
            }
            Ok(right as f64 / dev.len() as f64)
        });
        let scores: Vec<f64> = scores.into_iter().collect::<Result<_>>()?;
        let mut best = (grid[grid.len() - 1], scores[grid.len() - 1]);
        for (&g, &s) in grid.iter().zip(&scores).rev() {
            if s > best.1 {
                best = (g, s);
            }
        }
        working.set_gamma(&spec.id, best.0);
        out.gammas.insert(spec.id.clone(), best.0);
        out.accuracy
            .insert(spec.id.clone(), grid.iter().copied().zip(scores).collect());
    }
    Ok(out)
}
