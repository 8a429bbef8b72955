//! Datasets, compositional splits, exact match and per-clause accuracy.

mod dataset;
mod metric;

use serde::{Deserialize, Serialize};

pub use dataset::{
    anonymize_template, apportion, load_dataset, make_compositional_split, parse_dataset, Dataset,
    Example, GoldClause, Split, TemplateFamily,
};
pub use metric::{exact_match, normalize_sql};

use crate::error::Result;
use crate::grammar::{ClauseId, GrammarRule, SchemeDef};
use crate::par_map;
use crate::pipeline::{parse_utterance, ClauseTrace, Models, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseAccuracy {
    pub clause: ClauseId,
    /// Fraction of examples whose clauses up to and including this one (in
    /// generation order) are all correct.
    pub cascading: f64,
    /// Fraction of examples whose prediction for this clause alone is correct.
    pub marginal: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTaxonomy {
    /// Wrong FROM table.
    pub from_table: usize,
    /// A gold `>` predicted as `<`, everything else aligned.
    pub relation_gt_as_lt: usize,
    pub relation_lt_as_gt: usize,
    pub parse_failure: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub utterance: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub correct: bool,
    /// Per clause in generation order.
    pub clause_correct: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub examples: usize,
    pub exact_match: f64,
    pub clauses: Vec<ClauseAccuracy>,
    pub taxonomy: ErrorTaxonomy,
    pub outcomes: Vec<Outcome>,
}

impl EvalReport {
    pub fn clause(&self, id: &ClauseId) -> Option<&ClauseAccuracy> {
        self.clauses.iter().find(|c| &c.clause == id)
    }
}

/// Whether a predicted clause equals the gold one (`None` = null clause).
pub fn clause_matches(pred: Option<&str>, gold: Option<&str>) -> bool {
    match (pred, gold) {
        (None, None) => true,
        (Some(p), Some(g)) => exact_match(p, g),
        _ => false,
    }
}

fn predicted_clause_correct(traces: &[ClauseTrace], id: &ClauseId, gold: Option<&str>) -> bool {
    traces
        .iter()
        .find(|t| &t.clause.id == id)
        .is_some_and(|t| clause_matches(t.clause.sql.as_deref(), gold))
}

fn relation_swap(pred: &str, gold: &str, from: &str, to: &str) -> bool {
    let p = normalize_sql(pred);
    let g = normalize_sql(gold);
    let p: Vec<&str> = p.split_whitespace().collect();
    let g: Vec<&str> = g.split_whitespace().collect();
    p.len() == g.len() && p.iter().zip(&g).any(|(a, b)| *a == to && *b == from)
}

/// Per-example outcome of parsing under `cfg`.
pub fn evaluate_example(
    example: &Example,
    def: &SchemeDef,
    cfg: &PipelineConfig,
    models: &Models,
) -> Result<Outcome> {
    let gold = example.gold_clauses(def)?;
    let (predicted, traces, error) = match parse_utterance(&example.utterance, cfg, models) {
        Ok(t) => (Some(t.sql), t.clauses, None),
        Err(f) => (None, f.clauses, Some(f.error.to_string())),
    };
    let clause_correct = gold
        .iter()
        .map(|g| predicted_clause_correct(&traces, &g.clause.id, g.clause.sql.as_deref()))
        .collect();
    Ok(Outcome {
        utterance: example.utterance.clone(),
        gold: example.sql.clone(),
        correct: predicted
            .as_deref()
            .is_some_and(|p| exact_match(p, &example.sql)),
        predicted,
        clause_correct,
        error,
    })
}

/// Exact match, per-clause accuracy and error counts over `examples`.
/// Parse failures count as wrong.
pub fn evaluate(examples: &[Example], cfg: &PipelineConfig, models: &Models) -> Result<EvalReport> {
    let def = cfg.active_scheme();
    let outcomes: Vec<Outcome> = par_map(examples, |e| evaluate_example(e, def, cfg, models))
        .into_iter()
        .collect::<Result<_>>()?;
    let n = outcomes.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let order = def.generation_order();
    let clauses = order
        .iter()
        .enumerate()
        .map(|(i, spec)| ClauseAccuracy {
            clause: spec.id.clone(),
            cascading: frac(
                outcomes
                    .iter()
                    .filter(|o| o.clause_correct[..=i].iter().all(|&c| c))
                    .count(),
            ),
            marginal: frac(outcomes.iter().filter(|o| o.clause_correct[i]).count()),
        })
        .collect();

    let from_idx = order.iter().position(|s| s.rule == GrammarRule::From);
    let mut taxonomy = ErrorTaxonomy::default();
    for o in outcomes.iter().filter(|o| !o.correct) {
        if o.predicted.is_none() {
            taxonomy.parse_failure += 1;
        }
        if from_idx.is_some_and(|i| !o.clause_correct[i]) {
            taxonomy.from_table += 1;
        }
        if let Some(p) = &o.predicted {
            taxonomy.relation_gt_as_lt += usize::from(relation_swap(p, &o.gold, ">", "<"));
            taxonomy.relation_lt_as_gt += usize::from(relation_swap(p, &o.gold, "<", ">"));
        }
    }
    Ok(EvalReport {
        examples: n,
        exact_match: frac(outcomes.iter().filter(|o| o.correct).count()),
        clauses,
        taxonomy,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub seq_off: bool,
    pub zero_off: bool,
    pub report: EvalReport,
}

/// Full system, without sequential filling, and without the zero-shot
/// model; rows differ only in the two ablation flags.
pub fn run_ablations(
    examples: &[Example],
    cfg: &PipelineConfig,
    models: &Models,
) -> Result<Vec<AblationRow>> {
    [
        ("full", false, false),
        ("no_seq", true, false),
        ("no_zero", false, true),
    ]
    .into_iter()
    .map(|(name, seq_off, zero_off)| {
        Ok(AblationRow {
            name: name.to_string(),
            seq_off,
            zero_off,
            report: evaluate(examples, &cfg.with_flags(seq_off, zero_off), models)?,
        })
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_swap_detection() {
        assert!(relation_swap(
            "a WHERE Price < 300",
            "a WHERE Price > 300",
            ">",
            "<"
        ));
        assert!(!relation_swap(
            "a WHERE Price < 300",
            "a WHERE Price < 300",
            ">",
            "<"
        ));
        assert!(!relation_swap(
            "a WHERE Size < 3 gb",
            "a WHERE Price > 300",
            ">",
            "<"
        ));
    }

    #[test]
    fn clause_match_nulls() {
        assert!(clause_matches(None, None));
        assert!(!clause_matches(Some("WHERE x"), None));
        assert!(clause_matches(Some("where  x"), Some("WHERE x")));
    }
}
