//! Clause-by-clause parsing of one utterance, few-shot training data, and
//! ensemble-weight tuning.
//!
//! For each clause in generation order the context is the utterance, the
//! clauses generated so far (sequential clauses only), and the clause prompt.
//! The slot value decoded after that context is written into the prompt,
//! turned into a SQL clause, and finally all clauses are composed.

mod train;
mod tune;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use train::{
    build_vocabulary, prepare_training_records, read_corpus, ModelBundle, TrainOptions,
    TrainingRecord,
};
pub use tune::{gamma_grid, grid_search_gamma, GammaSearch};

use crate::constraint::{build_trie, collect_candidates, Schema};
use crate::decode::{decode_slot, EnsembleConfig, StepRecord, UncertaintyMode, ZeroShot};
use crate::error::{Error, Result};
use crate::grammar::{
    clause_from_canonical, compose, fill_slot, CanonicalUtterance, Clause, ClauseId, ClauseSpec,
    Dependency, Scheme, SchemeDef,
};
use crate::lm::{detokenize, LanguageModel, TokenId, Vocabulary};

/// How earlier clauses appear in a later clause's context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// SQL text of each non-null earlier clause.
    #[default]
    Sql,
    /// Filled prompt of every earlier clause, `None` values included.
    Canonical,
}

/// Zero-shot scoring through a remote endpoint instead of the bundled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteZeroShot {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_top_k() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scheme: SchemeDef,
    /// Scheme used when sequential filling is switched off.
    #[serde(default = "SchemeDef::whole_query")]
    pub whole_query: SchemeDef,
    #[serde(default)]
    pub default_ensemble: EnsembleConfig,
    /// Per-clause overrides of `default_ensemble`.
    #[serde(default)]
    pub ensemble: BTreeMap<ClauseId, EnsembleConfig>,
    /// Decode the whole query as a single slot.
    #[serde(default)]
    pub seq_off: bool,
    /// Few-shot model only (gamma forced to 1).
    #[serde(default)]
    pub zero_off: bool,
    #[serde(default)]
    pub context_mode: ContextMode,
    /// Keep per-step distributions in traces.
    #[serde(default)]
    pub record_distributions: bool,
    #[serde(default)]
    pub remote_zero: Option<RemoteZeroShot>,
}

impl PipelineConfig {
    pub fn new(scheme: SchemeDef) -> Self {
        PipelineConfig {
            scheme,
            whole_query: SchemeDef::whole_query(),
            default_ensemble: EnsembleConfig::default(),
            ensemble: BTreeMap::new(),
            seq_off: false,
            zero_off: false,
            context_mode: ContextMode::Sql,
            record_distributions: false,
            remote_zero: None,
        }
    }

    /// Reads a config file. `"scheme"` may be an inline scheme definition or
    /// a path to one, relative to the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut raw: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(serde_json::Value::String(rel)) = raw.get("scheme") {
            let scheme_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            raw["scheme"] = serde_json::to_value(load_scheme(&scheme_path)?)?;
        }
        let cfg: PipelineConfig = serde_json::from_value(raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.scheme.scheme == Scheme::WholeQuery {
            return Err(Error::Config(
                "the main scheme must be geoquery or ecommerce".into(),
            ));
        }
        self.whole_query
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.whole_query.scheme != Scheme::WholeQuery {
            return Err(Error::Config(
                "`whole_query` must use the whole_query scheme".into(),
            ));
        }
        self.default_ensemble
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        for (id, e) in &self.ensemble {
            if self.scheme.clause(id).is_none() && self.whole_query.clause(id).is_none() {
                return Err(Error::Config(format!(
                    "ensemble setting for unknown clause `{id}`"
                )));
            }
            e.validate()
                .map_err(|err| Error::Config(format!("clause `{id}`: {err}")))?;
        }
        Ok(())
    }

    /// The scheme actually decoded under the current flags.
    pub fn active_scheme(&self) -> &SchemeDef {
        if self.seq_off {
            &self.whole_query
        } else {
            &self.scheme
        }
    }

    /// Effective decode settings for a clause; `zero_off` pins gamma to 1.
    pub fn ensemble_for(&self, clause: &ClauseId) -> EnsembleConfig {
        let mut e = self
            .ensemble
            .get(clause)
            .cloned()
            .unwrap_or_else(|| self.default_ensemble.clone());
        if self.zero_off {
            e.gamma = 1.0;
            e.uncertainty = UncertaintyMode::Off;
        }
        e
    }

    pub fn set_gamma(&mut self, clause: &ClauseId, gamma: f64) {
        let default = self.default_ensemble.clone();
        self.ensemble.entry(clause.clone()).or_insert(default).gamma = gamma;
    }

    pub fn with_flags(&self, seq_off: bool, zero_off: bool) -> Self {
        PipelineConfig {
            seq_off,
            zero_off,
            ..self.clone()
        }
    }
}

pub fn load_scheme(path: impl AsRef<Path>) -> Result<SchemeDef> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let def: SchemeDef = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    def.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(def)
}

/// Models and lookup data bound to one pipeline run. All models share
/// `vocab`.
#[derive(Clone)]
pub struct Models {
    pub vocab: Arc<Vocabulary>,
    /// Few-shot model per clause id (including the whole-query clause).
    pub few: BTreeMap<ClauseId, Arc<dyn LanguageModel>>,
    pub zero: Option<Arc<dyn LanguageModel>>,
    pub schema: Schema,
    /// Distinct gold values per clause seen in training.
    pub training_values: BTreeMap<ClauseId, Vec<String>>,
}

impl Models {
    pub fn few_for(&self, clause: &ClauseId) -> Result<&dyn LanguageModel> {
        self.few
            .get(clause)
            .map(|m| m.as_ref() as &dyn LanguageModel)
            .ok_or_else(|| Error::Config(format!("no few-shot model bound for clause `{clause}`")))
    }

    /// Replaces the zero-shot model with a remote scorer.
    #[cfg(feature = "remote")]
    pub fn with_remote_zero(mut self, remote: &RemoteZeroShot) -> Self {
        let client = crate::lm::RemoteLmClient::new(
            remote.endpoint.clone(),
            self.vocab.clone(),
            Duration::from_millis(remote.timeout_ms),
        )
        .with_top_k(remote.top_k);
        self.zero = Some(Arc::new(client));
        self
    }

    /// Applies `cfg.remote_zero` when present.
    pub fn bind(self, cfg: &PipelineConfig) -> Result<Self> {
        match &cfg.remote_zero {
            None => Ok(self),
            #[cfg(feature = "remote")]
            Some(r) => Ok(self.with_remote_zero(r)),
            #[cfg(not(feature = "remote"))]
            Some(_) => {
                let _ = Duration::ZERO;
                Err(Error::Config(
                    "remote scoring needs the `remote` feature".into(),
                ))
            }
        }
    }
}

/// `[BOS] u m_1 .. m_{i-1} p_i` as token ids.
pub fn build_context(
    vocab: &Vocabulary,
    utterance: &str,
    previous: &[String],
    prompt: &str,
) -> Vec<TokenId> {
    let mut ctx = vec![vocab.bos()];
    ctx.extend(vocab.tokenize(utterance));
    for p in previous {
        ctx.extend(vocab.tokenize(p));
    }
    ctx.extend(vocab.tokenize(prompt));
    ctx
}

/// Text an earlier clause contributes to later contexts, if any.
pub fn context_text(
    mode: ContextMode,
    canonical: &CanonicalUtterance,
    clause: &Clause,
) -> Option<String> {
    match mode {
        ContextMode::Sql => clause.sql.clone(),
        ContextMode::Canonical => Some(canonical.text()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseTrace {
    pub clause: Clause,
    pub prompt: String,
    /// Context tokens, space separated.
    pub context: String,
    pub value: String,
    pub canonical: String,
    pub gamma: f64,
    pub candidates: usize,
    pub finished: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_trie_at: Option<usize>,
    pub fallback_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picked_zero: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<StepRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseTrace {
    pub utterance: String,
    /// In generation order.
    pub clauses: Vec<ClauseTrace>,
    pub sql: String,
    pub fallback_steps: usize,
    pub off_trie: Vec<ClauseId>,
}

impl ParseTrace {
    pub fn clause(&self, id: &ClauseId) -> Option<&ClauseTrace> {
        self.clauses.iter().find(|c| &c.clause.id == id)
    }
}

/// A parse that stopped early, with the clauses decoded before the error.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct ParseFailure {
    pub utterance: String,
    pub clauses: Vec<ClauseTrace>,
    #[source]
    pub error: Error,
}

impl ParseFailure {
    pub fn into_error(self) -> Error {
        self.error
    }
}

/// Parses `utterance` under `cfg`.
pub fn parse_utterance(
    utterance: &str,
    cfg: &PipelineConfig,
    models: &Models,
) -> std::result::Result<ParseTrace, ParseFailure> {
    let scheme = cfg.active_scheme();
    let mut traces: Vec<ClauseTrace> = Vec::new();
    let mut previous: Vec<String> = Vec::new();
    let fail = |traces: Vec<ClauseTrace>, error: Error| ParseFailure {
        utterance: utterance.to_string(),
        clauses: traces,
        error,
    };
    for spec in scheme.generation_order() {
        let prev: &[String] = match spec.dependency {
            Dependency::Sequential => &previous,
            Dependency::Independent => &[],
        };
        match decode_clause(utterance, spec, prev, cfg, models) {
            Ok((trace, canonical)) => {
                if let Some(text) = context_text(cfg.context_mode, &canonical, &trace.clause) {
                    previous.push(text);
                }
                traces.push(trace);
            }
            Err(e) => return Err(fail(traces, e)),
        }
    }
    let clauses: Vec<Clause> = traces.iter().map(|t| t.clause.clone()).collect();
    let sql = match compose(&clauses, scheme.scheme) {
        Ok(sql) => sql,
        Err(e) => return Err(fail(traces, e.into())),
    };
    let off_trie = traces
        .iter()
        .filter(|t| t.off_trie_at.is_some())
        .map(|t| t.clause.id.clone())
        .collect();
    Ok(ParseTrace {
        utterance: utterance.to_string(),
        fallback_steps: traces.iter().map(|t| t.fallback_steps).sum(),
        clauses: traces,
        sql,
        off_trie,
    })
}

fn decode_clause(
    utterance: &str,
    spec: &ClauseSpec,
    previous: &[String],
    cfg: &PipelineConfig,
    models: &Models,
) -> Result<(ClauseTrace, CanonicalUtterance)> {
    let vocab = &models.vocab;
    let ecfg = cfg.ensemble_for(&spec.id);
    let training = models
        .training_values
        .get(&spec.id)
        .into_iter()
        .flatten()
        .map(String::as_str);
    let mut cands = collect_candidates(spec, &models.schema, utterance, training)?;
    cands.retain_in_vocab(vocab);
    let trie = build_trie(&cands, vocab)?;
    let ctx = build_context(vocab, utterance, previous, &spec.prompt);
    let few = models.few_for(&spec.id)?;
    let zero = models
        .zero
        .as_deref()
        .map(|model| ZeroShot { model, trie: &trie });
    let slot =
        decode_slot(few, zero, vocab.eov(), &ctx, &ecfg).map_err(|source| Error::ClauseDecode {
            clause: spec.id.clone(),
            source,
        })?;
    let tokens = &slot.value.tokens;
    let value = match trie.surface(tokens) {
        Some(s) => s.to_string(),
        None => detokenize(&vocab.decode_tokens(tokens)),
    };
    let canonical = fill_slot(&spec.template(), &value)?;
    let clause = clause_from_canonical(&canonical, spec)?;
    let trace = ClauseTrace {
        clause,
        prompt: spec.prompt.clone(),
        context: vocab.decode_tokens(&ctx).join(" "),
        value,
        canonical: canonical.text(),
        gamma: ecfg.gamma,
        candidates: cands.len(),
        finished: slot.value.finished,
        off_trie_at: slot.value.off_trie_at,
        fallback_steps: slot.value.fallback_steps,
        uncertainty: slot.uncertainty,
        picked_zero: slot.picked_zero,
        steps: cfg.record_distributions.then_some(slot.value.steps),
    };
    Ok((trace, canonical))
}
