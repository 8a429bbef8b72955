use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_context, context_text, ContextMode, Models, PipelineConfig};
use crate::constraint::Schema;
use crate::error::{Error, Result};
use crate::eval::Example;
use crate::grammar::{is_none_value, ClauseId, SchemeDef, NONE_VALUE};
use crate::lm::{
    Combine, EovAdapter, HybridModel, LanguageModel, NgramTrainer, Smoothing, TokenId,
    TriggerTrainer, Vocabulary,
};

/// Teacher-forced training pair for one clause of one example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    /// Index of the example in the input slice.
    pub example: usize,
    pub clause: ClauseId,
    /// Utterance, gold earlier clauses (sequential clauses only), prompt.
    pub context: Vec<TokenId>,
    /// Gold value tokens, without the end-of-value marker.
    pub target: Vec<TokenId>,
}

/// One record per (example, clause), built from gold clauses only. Absent
/// optional clauses get the target `None`.
pub fn prepare_training_records(
    examples: &[Example],
    def: &SchemeDef,
    vocab: &Vocabulary,
    mode: ContextMode,
) -> Result<Vec<TrainingRecord>> {
    let mut out = Vec::with_capacity(examples.len() * def.clauses.len());
    for (i, ex) in examples.iter().enumerate() {
        let gold = ex.gold_clauses(def)?;
        let mut previous: Vec<String> = Vec::new();
        for (spec, g) in def.generation_order().into_iter().zip(&gold) {
            let prev: &[String] = match spec.dependency {
                crate::grammar::Dependency::Sequential => &previous,
                crate::grammar::Dependency::Independent => &[],
            };
            out.push(TrainingRecord {
                example: i,
                clause: spec.id.clone(),
                context: build_context(vocab, &ex.utterance, prev, &spec.prompt),
                target: vocab.tokenize(&g.canonical.value),
            });
            if let Some(text) = context_text(mode, &g.canonical, &g.clause) {
                previous.push(text);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub order: usize,
    /// Interpolation weights (orders `0..=order`) of the few-shot n-grams;
    /// `None` uses [`Smoothing::default_for`].
    pub few_smoothing: Option<Vec<f64>>,
    /// Same for the zero-shot n-gram.
    pub zero_smoothing: Option<Vec<f64>>,
    /// Trigger-model share in the few-shot mixtures.
    pub few_trigger_weight: f64,
    /// Trigger-model share in the zero-shot mixture.
    pub zero_trigger_weight: f64,
    pub trigger_floor: f64,
    /// Weight of the empty trigger used while fitting trigger models.
    pub trigger_null_weight: f64,
    pub em_iterations: usize,
    pub combine: Combine,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            order: 3,
            few_smoothing: None,
            zero_smoothing: None,
            few_trigger_weight: 0.7,
            zero_trigger_weight: 0.5,
            trigger_floor: 0.01,
            trigger_null_weight: 1.0,
            em_iterations: 5,
            combine: Combine::Rescale,
        }
    }
}

impl TrainOptions {
    fn smoothing(&self, weights: &Option<Vec<f64>>) -> Result<Smoothing> {
        let s = match weights {
            Some(w) => Smoothing::new(w.clone())?,
            None => Smoothing::default_for(self.order),
        };
        if s.order() != self.order {
            return Err(Error::Config(format!(
                "smoothing has {} weights but order {} needs {}",
                s.weights().len(),
                self.order,
                self.order + 1
            )));
        }
        Ok(s)
    }
}

/// Everything needed to rebuild [`Models`]; serialisable as one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub vocab: Vocabulary,
    pub few: BTreeMap<ClauseId, HybridModel>,
    pub zero: Option<HybridModel>,
    pub schema: Schema,
    pub training_values: BTreeMap<ClauseId, Vec<String>>,
    pub options: TrainOptions,
}

fn strip_placeholders(s: &str) -> String {
    s.replace("{num}", " ").replace("{ngram}", " ")
}

/// Shared vocabulary: generic corpus, training data, `extra_texts` (e.g.
/// utterances to be parsed later), prompts, grammar terminals and schema
/// names.
pub fn build_vocabulary(
    train: &[Example],
    extra_texts: &[String],
    corpus: &[String],
    cfg: &PipelineConfig,
    schema: &Schema,
) -> Vocabulary {
    let mut v = Vocabulary::new();
    v.extend_from_text(NONE_VALUE);
    for def in [&cfg.scheme, &cfg.whole_query] {
        for c in &def.clauses {
            v.extend_from_text(&c.prompt);
            for g in &c.sources.grammar {
                v.extend_from_text(&strip_placeholders(g));
            }
        }
    }
    for name in schema.names() {
        v.extend_from_text(&name);
    }
    for line in corpus {
        v.extend_from_text(line);
    }
    for ex in train {
        v.extend_from_text(&ex.utterance);
        v.extend_from_text(&ex.sql);
        for val in ex.clauses.values().flatten() {
            v.extend_from_text(val);
        }
    }
    for t in extra_texts {
        v.extend_from_text(t);
    }
    v
}

impl ModelBundle {
    /// Trains per-clause few-shot models on `train` (for the configured
    /// scheme and the whole-query scheme) and the zero-shot model on
    /// `corpus`. An empty corpus leaves the zero-shot model unset.
    pub fn train(
        train: &[Example],
        extra_texts: &[String],
        corpus: &[String],
        cfg: &PipelineConfig,
        schema: Schema,
        opts: &TrainOptions,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Config("no training examples".into()));
        }
        let few_smoothing = opts.smoothing(&opts.few_smoothing)?;
        let zero_smoothing = opts.smoothing(&opts.zero_smoothing)?;
        let vocab = build_vocabulary(train, extra_texts, corpus, cfg, &schema);
        let n = vocab.len();
        let specials = vocab.eov().0 + 1;

        let mut few = BTreeMap::new();
        let mut training_values: BTreeMap<ClauseId, Vec<String>> = BTreeMap::new();
        for def in [&cfg.scheme, &cfg.whole_query] {
            let records = prepare_training_records(train, def, &vocab, cfg.context_mode)?;
            let mut by_clause: BTreeMap<&ClauseId, (NgramTrainer, TriggerTrainer)> = def
                .clauses
                .iter()
                .map(|c| {
                    (
                        &c.id,
                        (
                            NgramTrainer::new(n, opts.order),
                            TriggerTrainer::new(n, specials)
                                .with_null_weight(opts.trigger_null_weight),
                        ),
                    )
                })
                .collect();
            for r in &records {
                let (ng, tr) = by_clause
                    .get_mut(&r.clause)
                    .expect("record for a scheme clause");
                let mut targets = r.target.clone();
                targets.push(vocab.eov());
                let mut seq = r.context.clone();
                seq.extend_from_slice(&targets);
                ng.add_targets(&seq, r.context.len());
                tr.add_record(&r.context, &targets);
            }
            for (id, (ng, tr)) in by_clause {
                let ngram = ng
                    .finish(few_smoothing.clone())
                    .map_err(|e| Error::Config(format!("clause `{id}`: {e}")))?;
                let trigger = tr.finish(opts.trigger_floor, opts.em_iterations);
                few.insert(
                    id.clone(),
                    HybridModel::new(ngram, trigger, opts.few_trigger_weight)
                        .with_combine(opts.combine),
                );
            }
            for spec in &def.clauses {
                let values: BTreeSet<String> = train
                    .iter()
                    .filter_map(|ex| ex.gold_value(def, &spec.id).ok())
                    .filter(|v| !is_none_value(v))
                    .collect();
                training_values.insert(spec.id.clone(), values.into_iter().collect());
            }
        }

        let mut zng = NgramTrainer::new(n, opts.order);
        let mut ztr = TriggerTrainer::new(n, specials).with_null_weight(opts.trigger_null_weight);
        let mut lines = 0;
        for line in corpus.iter().filter(|l| !l.trim().is_empty()) {
            let mut seq = vec![vocab.bos()];
            seq.extend(vocab.tokenize(line));
            seq.push(vocab.eos());
            zng.add_sequence(&seq);
            ztr.add_sentence(&seq);
            lines += 1;
        }
        let zero = if lines == 0 {
            None
        } else {
            let ngram = zng.finish(zero_smoothing)?;
            let trigger = ztr.finish(opts.trigger_floor, opts.em_iterations);
            Some(
                HybridModel::new(ngram, trigger, opts.zero_trigger_weight)
                    .with_combine(opts.combine),
            )
        };

        Ok(ModelBundle {
            vocab,
            few,
            zero,
            schema,
            training_values,
            options: opts.clone(),
        })
    }

    pub fn to_models(&self) -> Models {
        let vocab = Arc::new(self.vocab.clone());
        let few = self
            .few
            .iter()
            .map(|(id, m)| (id.clone(), Arc::new(m.clone()) as Arc<dyn LanguageModel>))
            .collect();
        let zero = self.zero.clone().map(|m| {
            Arc::new(EovAdapter::new(m, vocab.eos(), vocab.eov())) as Arc<dyn LanguageModel>
        });
        Models {
            vocab,
            few,
            zero,
            schema: self.schema.clone(),
            training_values: self.training_values.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = serde_json::to_vec(self)?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Data(format!("{}: not a model bundle: {e}", path.display())))
    }
}

/// Reads a plain-text corpus, one sequence per line.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}
