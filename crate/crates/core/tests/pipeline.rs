//! Whole-pipeline runs with scripted models.

use std::collections::BTreeMap;
use std::sync::Arc;

use promptfill::constraint::Schema;
use promptfill::eval::exact_match;
use promptfill::grammar::{ClauseId, SchemeDef};
use promptfill::lm::{Distribution, LanguageModel, ScoreError, TokenId, Vocabulary};
use promptfill::pipeline::{parse_utterance, Models, PipelineConfig};

/// Continues one of a few scripted values after a prompt.
///
/// A rule applies when the context contains `after` and, following the last
/// occurrence of `prompt`, a prefix of one of its values. Matching values
/// share 90% of the mass in proportion to their weight; the rest is uniform.
struct Scripted {
    vocab: Arc<Vocabulary>,
    rules: Vec<Rule>,
}

struct Rule {
    after: Vec<TokenId>,
    prompt: Vec<TokenId>,
    values: Vec<(Vec<TokenId>, f64)>,
}

fn find_last(hay: &[TokenId], needle: &[TokenId]) -> Option<usize> {
    (0..=hay.len().checked_sub(needle.len())?)
        .rev()
        .find(|&i| &hay[i..i + needle.len()] == needle)
}

impl Scripted {
    fn new(vocab: &Arc<Vocabulary>) -> Self {
        Scripted {
            vocab: vocab.clone(),
            rules: Vec::new(),
        }
    }

    fn rule(mut self, after: &str, prompt: &str, values: &[(&str, f64)]) -> Self {
        let v = &self.vocab;
        self.rules.push(Rule {
            after: v.tokenize(after),
            prompt: v.tokenize(prompt),
            values: values.iter().map(|(s, w)| (v.tokenize(s), *w)).collect(),
        });
        self
    }
}

impl LanguageModel for Scripted {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        let n = self.vocab.len();
        for r in &self.rules {
            if !r.after.is_empty() && find_last(context, &r.after).is_none() {
                continue;
            }
            let Some(at) = find_last(context, &r.prompt) else {
                continue;
            };
            let done = &context[at + r.prompt.len()..];
            let mut next: BTreeMap<TokenId, f64> = BTreeMap::new();
            for (val, w) in &r.values {
                if val.starts_with(done) {
                    let t = val.get(done.len()).copied().unwrap_or(self.vocab.eov());
                    *next.entry(t).or_default() += w;
                }
            }
            if next.is_empty() {
                continue;
            }
            let total: f64 = next.values().sum();
            let mut probs = vec![0.1 / n as f64; n];
            for (t, w) in next {
                probs[t.index()] += 0.9 * w / total;
            }
            return Distribution::normalized(probs);
        }
        Ok(Distribution::uniform(n))
    }
}

const UTTERANCE: &str = "what is the population of utah";

fn geo_models(cfg: &PipelineConfig) -> Models {
    let schema: Schema = serde_json::from_str(
        r#"{"tables": {"city": ["city_name", "population", "state_name"], "state": ["state_name", "population", "area"]}}"#,
    )
    .unwrap();
    let training_values = BTreeMap::from([
        (
            ClauseId::from("from"),
            vec!["city".to_string(), "state".to_string()],
        ),
        (
            ClauseId::from("select"),
            vec!["city . population".to_string()],
        ),
        (
            ClauseId::from("where"),
            vec![
                "city . city_name = \"utah\"".to_string(),
                "state . state_name = \"utah\"".to_string(),
            ],
        ),
        (ClauseId::from("group_by"), vec![]),
        (ClauseId::from("order_by"), vec![]),
    ]);
    let mut texts = vec![UTTERANCE.to_string(), "None FROM SELECT WHERE".to_string()];
    texts.extend(cfg.scheme.clauses.iter().map(|c| c.prompt.clone()));
    texts.extend(schema.names());
    texts.extend(training_values.values().flatten().cloned());
    let vocab = Arc::new(Vocabulary::from_texts(texts.iter().map(String::as_str)));

    // Few-shot: trained on "how many people live in" questions, it prefers
    // the city table, and later clauses follow whatever table came first.
    let few = Scripted::new(&vocab)
        .rule("", "the sentence requires to group by", &[("None", 1.0)])
        .rule(
            "",
            "the sentence requires the result to be ordered by",
            &[("None", 1.0)],
        )
        .rule(
            "SELECT city",
            "the sentence requires",
            &[("city . city_name = \"utah\"", 1.0)],
        )
        .rule(
            "SELECT state",
            "the sentence requires",
            &[("state . state_name = \"utah\"", 1.0)],
        )
        .rule(
            "FROM city",
            "the sentence talks about",
            &[("city . population", 1.0)],
        )
        .rule(
            "FROM state",
            "the sentence talks about",
            &[("state . population", 1.0)],
        )
        .rule(
            "",
            "the sentence talks about",
            &[("city", 0.6), ("state", 0.4)],
        );
    let few: Arc<dyn LanguageModel> = Arc::new(few);
    // Zero-shot: small raw mass, but it knows utah is a state.
    let zero = Scripted::new(&vocab).rule(
        UTTERANCE,
        "the sentence talks about",
        &[("state", 0.9), ("city", 0.1)],
    );
    Models {
        few: cfg
            .scheme
            .clauses
            .iter()
            .map(|c| (c.id.clone(), few.clone()))
            .collect(),
        zero: Some(Arc::new(zero)),
        vocab,
        schema,
        training_values,
    }
}

#[test]
fn ensemble_fixes_the_table_choice() {
    let cfg = PipelineConfig::new(SchemeDef::geoquery());
    let models = geo_models(&cfg);
    let trace = parse_utterance(UTTERANCE, &cfg, &models).unwrap();
    let truth = "SELECT state . population FROM state WHERE state . state_name = \"utah\"";
    assert!(exact_match(&trace.sql, truth), "{}", trace.sql);
    let from = trace.clause(&ClauseId::from("from")).unwrap();
    assert_eq!(from.value, "state");
    assert_eq!(from.gamma, 0.5);
    assert!(trace.off_trie.is_empty());
}

#[test]
fn few_shot_alone_repeats_the_spurious_table() {
    let cfg = PipelineConfig::new(SchemeDef::geoquery()).with_flags(false, true);
    let models = geo_models(&cfg);
    let trace = parse_utterance(UTTERANCE, &cfg, &models).unwrap();
    let wrong = "SELECT city . population FROM city WHERE city . city_name = \"utah\"";
    assert!(exact_match(&trace.sql, wrong), "{}", trace.sql);
}

#[test]
fn later_contexts_carry_earlier_clauses() {
    let cfg = PipelineConfig::new(SchemeDef::geoquery());
    let models = geo_models(&cfg);
    let trace = parse_utterance(UTTERANCE, &cfg, &models).unwrap();
    let select = trace.clause(&ClauseId::from("select")).unwrap();
    assert!(select.context.contains("from state"), "{}", select.context);
    let order = trace.clause(&ClauseId::from("order_by")).unwrap();
    assert!(
        order.context.contains("where state . state_name"),
        "{}",
        order.context
    );
    assert!(order.clause.sql.is_none());
}
