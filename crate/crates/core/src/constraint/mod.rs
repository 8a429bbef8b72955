//! Candidate values per clause and the prefix trie that turns them into
//! allowed-token sets during decoding.

mod trie;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use trie::{build_trie, CandidateTrie};

use crate::error::{Error, Result};
use crate::grammar::{ClauseId, ClauseSpec, NONE_VALUE};
use crate::lm::{split_words, Vocabulary};

/// Longest utterance n-gram offered as a copy candidate.
pub const MAX_UTTERANCE_NGRAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Grammar,
    Schema,
    Utterance,
    TrainingData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaSource {
    /// Table names.
    Tables,
    /// Qualified columns, written `table . column`.
    Columns,
}

/// Which sources feed a clause's candidate set.
///
/// `grammar` entries are fixed terminals and may contain the placeholders
/// `{num}` (any numeral in the utterance) and `{ngram}` (any utterance n-gram
/// up to [`MAX_UTTERANCE_NGRAM`] words); an entry with placeholders expands
/// to every combination.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateSources {
    pub grammar: Vec<String>,
    pub schema: Option<SchemaSource>,
    pub utterance: bool,
    pub training: bool,
}

/// Database schema: table name to column names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub tables: BTreeMap<String, Vec<String>>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: bad schema file: {e}", path.display())))
    }

    pub fn names(&self) -> impl Iterator<Item = String> + '_ {
        self.tables
            .iter()
            .flat_map(|(t, cols)| std::iter::once(t.clone()).chain(cols.iter().cloned()))
    }
}

/// Candidate values of one clause with the sources each value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub clause: ClauseId,
    pub values: BTreeMap<String, BTreeSet<Provenance>>,
}

impl CandidateSet {
    pub fn new(clause: ClauseId) -> Self {
        CandidateSet {
            clause,
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, value: impl Into<String>, from: Provenance) {
        let value = value.into();
        let value = value.trim();
        if value.is_empty() {
            return;
        }
        self.values
            .entry(value.to_string())
            .or_default()
            .insert(from);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.values.contains_key(value)
    }

    /// Drops values that would tokenize to nothing or to an unknown marker.
    pub fn retain_in_vocab(&mut self, vocab: &Vocabulary) {
        self.values.retain(|v, _| {
            let ids = vocab.tokenize(v);
            !ids.is_empty() && !ids.contains(&vocab.unk())
        });
    }
}

/// Candidate fixture file: `{"clause": id, "values": [...], "nullable": bool}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateFixture {
    pub clause: ClauseId,
    pub values: Vec<String>,
    #[serde(default)]
    pub nullable: bool,
}

impl From<&CandidateFixture> for CandidateSet {
    fn from(f: &CandidateFixture) -> Self {
        let mut set = CandidateSet::new(f.clause.clone());
        for v in &f.values {
            set.insert(v.clone(), Provenance::Grammar);
        }
        if f.nullable {
            set.insert(NONE_VALUE, Provenance::Grammar);
        }
        set
    }
}

fn is_numeral(word: &str) -> bool {
    !word.is_empty()
        && word.chars().all(|c| c.is_ascii_digit() || c == '.')
        && word.chars().any(|c| c.is_ascii_digit())
}

/// Contiguous n-grams of the case-folded utterance, up to `max_n` words.
pub fn utterance_ngrams(utterance: &str, max_n: usize) -> Vec<String> {
    let words: Vec<String> = split_words(utterance).collect();
    let mut out = Vec::new();
    for n in 1..=max_n.min(words.len()) {
        for w in words.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

pub fn utterance_numerals(utterance: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    split_words(utterance)
        .filter(|w| is_numeral(w))
        .filter(|w| seen.insert(w.clone()))
        .collect()
}

/// Expands `{num}` and `{ngram}` placeholders in a grammar terminal.
fn expand_placeholders(template: &str, numerals: &[String], ngrams: &[String]) -> Vec<String> {
    let mut partial = vec![String::new()];
    let mut rest = template;
    loop {
        let next = [("{num}", numerals), ("{ngram}", ngrams)]
            .into_iter()
            .filter_map(|(ph, fill)| rest.find(ph).map(|at| (at, ph, fill)))
            .min_by_key(|(at, _, _)| *at);
        let Some((at, ph, fill)) = next else {
            for p in &mut partial {
                p.push_str(rest);
            }
            return partial;
        };
        let literal = &rest[..at];
        partial = partial
            .iter()
            .flat_map(|p| fill.iter().map(move |f| format!("{p}{literal}{f}")))
            .collect();
        if partial.is_empty() {
            return partial;
        }
        rest = &rest[at + ph.len()..];
    }
}

/// Gathers the candidate values for one clause from the sources its spec
/// enables, plus `None` when the clause is nullable.
pub fn collect_candidates<'a>(
    spec: &ClauseSpec,
    schema: &Schema,
    utterance: &str,
    training_values: impl IntoIterator<Item = &'a str>,
) -> Result<CandidateSet> {
    let mut set = CandidateSet::new(spec.id.clone());
    let src = &spec.sources;
    let needs_ngrams = src.utterance || src.grammar.iter().any(|g| g.contains("{ngram}"));
    let ngrams = if needs_ngrams {
        utterance_ngrams(utterance, MAX_UTTERANCE_NGRAM)
    } else {
        Vec::new()
    };
    let numerals = utterance_numerals(utterance);

    for g in &src.grammar {
        for v in expand_placeholders(g, &numerals, &ngrams) {
            set.insert(v, Provenance::Grammar);
        }
    }
    match src.schema {
        Some(SchemaSource::Tables) => {
            for t in schema.tables.keys() {
                set.insert(t.clone(), Provenance::Schema);
            }
        }
        Some(SchemaSource::Columns) => {
            for (t, cols) in &schema.tables {
                for c in cols {
                    set.insert(format!("{t} . {c}"), Provenance::Schema);
                }
            }
        }
        None => {}
    }
    if src.utterance {
        for v in ngrams.iter().chain(&numerals) {
            set.insert(v.clone(), Provenance::Utterance);
        }
    }
    if src.training {
        for v in training_values {
            if !crate::grammar::is_none_value(v) {
                set.insert(v, Provenance::TrainingData);
            }
        }
    }
    if set.is_empty() && !spec.nullable {
        return Err(Error::Config(format!(
            "clause `{}` has no candidate values from any source",
            spec.id
        )));
    }
    if spec.nullable {
        set.insert(NONE_VALUE, Provenance::Grammar);
    }
    Ok(set)
}
