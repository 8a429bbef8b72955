//! Browser demo: a parser trained and gamma-tuned at load time on the
//! bundled ecommerce data, with a per-step view of the ensemble, a gamma
//! sweep for one clause and a MoC/RoC calculator.
//!
//! [`DemoCore`] holds the logic and is usable natively; [`Demo`] is the thin
//! JavaScript-facing wrapper.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use promptfill::constraint::Schema;
use promptfill::decode::{moc, roc};
use promptfill::eval::{parse_dataset, Example, Split};
use promptfill::grammar::ClauseId;
use promptfill::lm::{Distribution, TokenId, Vocabulary};
use promptfill::pipeline::{
    grid_search_gamma, parse_utterance, ModelBundle, Models, PipelineConfig, TrainOptions,
};

const SCHEME: &str = include_str!("../../../data/ecommerce/scheme.json");
const SCHEMA: &str = include_str!("../../../data/ecommerce/schema.json");
const DATASET: &str = include_str!("../../../data/ecommerce/dataset.jsonl");
const CORPUS: &str = include_str!("../../../data/ecommerce/corpus.txt");
const OPTIONS: &str = include_str!("../../../data/ecommerce/train_options.json");

/// Tokens shown per distribution in the step view.
const TOP_K: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct Ranked {
    pub token: String,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepView {
    pub chosen: String,
    pub few: Vec<Ranked>,
    /// Empty when the zero-shot path was not consulted.
    pub zero: Vec<Ranked>,
    pub ensembled: Vec<Ranked>,
    pub allowed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClauseView {
    pub clause: String,
    pub gamma: f64,
    pub value: String,
    pub sql: Option<String>,
    pub off_trie: bool,
    pub steps: Vec<StepView>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParseView {
    pub sql: String,
    pub clauses: Vec<ClauseView>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub sql: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Confidence {
    pub p1: f64,
    pub p2: f64,
    pub moc: f64,
    pub roc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub utterance: String,
    pub sql: String,
    pub split: String,
}

pub struct DemoCore {
    cfg: PipelineConfig,
    models: Models,
    samples: Vec<Example>,
}

fn ranked(vocab: &Vocabulary, dist: &Distribution) -> Vec<Ranked> {
    dist.top_k(TOP_K)
        .into_iter()
        .map(|(t, p)| Ranked {
            token: token_name(vocab, t),
            prob: p,
        })
        .collect()
}

fn token_name(vocab: &Vocabulary, t: TokenId) -> String {
    vocab.get_token(t).unwrap_or("?").to_string()
}

impl DemoCore {
    /// Trains few-shot and zero-shot models on the bundled files and tunes
    /// each clause's gamma on the dev split.
    pub fn new() -> Result<Self, String> {
        let scheme = serde_json::from_str(SCHEME).map_err(|e| e.to_string())?;
        let mut cfg = PipelineConfig::new(scheme);
        cfg.validate().map_err(|e| e.to_string())?;
        let schema: Schema = serde_json::from_str(SCHEMA).map_err(|e| e.to_string())?;
        let opts: TrainOptions = serde_json::from_str(OPTIONS).map_err(|e| e.to_string())?;
        let ds = parse_dataset(DATASET, &cfg.scheme).map_err(|e| e.to_string())?;
        let corpus: Vec<String> = CORPUS.lines().map(str::to_string).collect();
        let utterances: Vec<String> = ds.examples.iter().map(|e| e.utterance.clone()).collect();
        let train = ds.split(Split::Train);
        let bundle = ModelBundle::train(&train, &utterances, &corpus, &cfg, schema, &opts)
            .map_err(|e| e.to_string())?;
        let models = bundle.to_models();
        let dev = ds.split(Split::Dev);
        grid_search_gamma(&dev, &cfg, &models, 0.1)
            .map_err(|e| e.to_string())?
            .apply(&mut cfg);
        let mut samples = ds.split(Split::Test);
        samples.extend(dev);
        Ok(DemoCore {
            cfg,
            models,
            samples,
        })
    }

    /// Clause ids in generation order with their tuned gammas.
    pub fn gammas(&self) -> Vec<(String, f64)> {
        self.cfg
            .scheme
            .generation_order()
            .into_iter()
            .map(|c| {
                (
                    c.id.as_str().to_string(),
                    self.cfg.ensemble_for(&c.id).gamma,
                )
            })
            .collect()
    }

    fn config(&self, clause: &str, gamma: f64) -> Result<PipelineConfig, String> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(format!("gamma {gamma} is outside [0, 1]"));
        }
        let id = ClauseId::from(clause);
        if self.cfg.scheme.clause(&id).is_none() {
            return Err(format!("no clause `{clause}`"));
        }
        let mut cfg = self.cfg.clone();
        cfg.set_gamma(&id, gamma);
        cfg.record_distributions = true;
        Ok(cfg)
    }

    /// Parses `utterance` with `gamma` for `clause` and the tuned gammas
    /// elsewhere, returning the per-step distributions.
    pub fn parse(&self, utterance: &str, clause: &str, gamma: f64) -> Result<ParseView, String> {
        let cfg = self.config(clause, gamma)?;
        let trace = parse_utterance(utterance, &cfg, &self.models).map_err(|e| e.to_string())?;
        let vocab = &self.models.vocab;
        let clauses = trace
            .clauses
            .iter()
            .map(|c| ClauseView {
                clause: c.clause.id.as_str().to_string(),
                gamma: c.gamma,
                value: c.value.clone(),
                sql: c.clause.sql.clone(),
                off_trie: c.off_trie_at.is_some(),
                steps: c
                    .steps
                    .iter()
                    .flatten()
                    .map(|s| StepView {
                        chosen: token_name(vocab, s.chosen),
                        few: ranked(vocab, &s.few),
                        zero: s
                            .zero_rescaled
                            .as_ref()
                            .map(|z| ranked(vocab, z))
                            .unwrap_or_default(),
                        ensembled: ranked(vocab, &s.ensembled),
                        allowed: s.allowed.len(),
                    })
                    .collect(),
            })
            .collect();
        Ok(ParseView {
            sql: trace.sql,
            clauses,
        })
    }

    /// The parse with `clause` at gamma = 0, 0.1, ..., 1.
    pub fn sweep(&self, utterance: &str, clause: &str) -> Result<Vec<SweepPoint>, String> {
        (0..=10)
            .map(|k| {
                let gamma = k as f64 / 10.0;
                let mut cfg = self.config(clause, gamma)?;
                cfg.record_distributions = false;
                let sql = parse_utterance(utterance, &cfg, &self.models)
                    .ok()
                    .map(|t| t.sql);
                Ok(SweepPoint { gamma, sql })
            })
            .collect()
    }

    /// MoC and RoC of a distribution given as non-negative weights.
    pub fn confidence(weights: &[f64]) -> Result<Confidence, String> {
        let d = Distribution::normalized(weights.to_vec()).map_err(|e| e.to_string())?;
        let (p1, p2) = d.top_two();
        Ok(Confidence {
            p1,
            p2,
            moc: moc(&d).map_err(|e| e.to_string())?,
            roc: roc(&d).map_err(|e| e.to_string())?,
        })
    }

    /// Held-out utterances with their gold queries.
    pub fn samples(&self) -> Vec<Sample> {
        self.samples
            .iter()
            .map(|e| Sample {
                utterance: e.utterance.clone(),
                sql: e.sql.clone(),
                split: e.split.map(|s| s.to_string()).unwrap_or_default(),
            })
            .collect()
    }
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// JavaScript entry point; every method returns JSON text.
#[wasm_bindgen]
pub struct Demo {
    core: DemoCore,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Demo, JsValue> {
        DemoCore::new()
            .map(|core| Demo { core })
            .map_err(|e| JsValue::from_str(&e))
    }

    /// `[[clause, gamma], ...]` in generation order.
    pub fn gammas(&self) -> Result<String, JsValue> {
        to_js(Ok(self.core.gammas()))
    }

    pub fn parse(&self, utterance: &str, clause: &str, gamma: f64) -> Result<String, JsValue> {
        to_js(self.core.parse(utterance, clause, gamma))
    }

    pub fn sweep(&self, utterance: &str, clause: &str) -> Result<String, JsValue> {
        to_js(self.core.sweep(utterance, clause))
    }

    /// `weights` as comma- or space-separated numbers.
    pub fn confidence(&self, weights: &str) -> Result<String, JsValue> {
        let parsed: Result<Vec<f64>, String> = weights
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
            .collect();
        to_js(parsed.and_then(|w| DemoCore::confidence(&w)))
    }

    pub fn samples(&self) -> Result<String, JsValue> {
        to_js(Ok(self.core.samples()))
    }
}
