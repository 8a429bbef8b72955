use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metric::normalize_sql;
use crate::error::{Error, Result};
use crate::grammar::{
    clause_from_canonical, compose, fill_slot, is_none_value, CanonicalUtterance, Clause, ClauseId,
    Scheme, SchemeDef, NONE_VALUE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

/// One annotated utterance. `clauses` holds the gold slot value of each
/// clause; `null` (or a missing key) marks an absent optional clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub utterance: String,
    pub sql: String,
    pub clauses: BTreeMap<ClauseId, Option<String>>,
    /// Anonymised SQL; filled in by the loader when empty.
    #[serde(default)]
    pub template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Gold clause of an example with the filled prompt it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldClause {
    pub canonical: CanonicalUtterance,
    pub clause: Clause,
}

impl Example {
    /// Gold value of `clause`, or `None` for an absent optional clause.
    pub fn gold_value(&self, def: &SchemeDef, clause: &ClauseId) -> Result<String> {
        if def.scheme == Scheme::WholeQuery {
            return Ok(self.sql.clone());
        }
        let spec = def
            .clause(clause)
            .ok_or_else(|| Error::Config(format!("unknown clause `{clause}`")))?;
        match self.clauses.get(clause) {
            Some(Some(v)) if !is_none_value(v) => Ok(v.clone()),
            _ if spec.nullable => Ok(NONE_VALUE.to_string()),
            _ => Err(Error::Data(format!(
                "example `{}` has no value for required clause `{clause}`",
                self.utterance
            ))),
        }
    }

    /// Gold clauses in generation order.
    pub fn gold_clauses(&self, def: &SchemeDef) -> Result<Vec<GoldClause>> {
        def.generation_order()
            .into_iter()
            .map(|spec| {
                let value = self.gold_value(def, &spec.id)?;
                let bad = |e: crate::grammar::GrammarError| {
                    Error::Data(format!("example `{}`: {e}", self.utterance))
                };
                let canonical = fill_slot(&spec.template(), &value).map_err(bad)?;
                let clause = clause_from_canonical(&canonical, spec).map_err(bad)?;
                Ok(GoldClause { canonical, clause })
            })
            .collect()
    }

    /// Checks that the gold clauses compose to `sql`.
    pub fn check_composition(&self, def: &SchemeDef) -> Result<()> {
        let clauses: Vec<Clause> = self
            .gold_clauses(def)?
            .into_iter()
            .map(|g| g.clause)
            .collect();
        let composed = compose(&clauses, def.scheme)
            .map_err(|e| Error::Data(format!("example `{}`: {e}", self.utterance)))?;
        if normalize_sql(&composed) != normalize_sql(&self.sql) {
            return Err(Error::Data(format!(
                "clauses compose to `{composed}` but sql is `{}`",
                self.sql
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn split(&self, split: Split) -> Vec<Example> {
        self.examples
            .iter()
            .filter(|e| e.split == Some(split))
            .cloned()
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut out: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
        for e in &self.examples {
            if let Some(s) = e.split {
                *out.entry(s).or_default() += 1;
            }
        }
        out
    }

    /// Fails when one template is used by more than one split.
    pub fn check_no_leakage(&self) -> Result<()> {
        let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
        for e in &self.examples {
            let Some(split) = e.split else { continue };
            match seen.get(e.template.as_str()) {
                Some(&first) if first != split => {
                    return Err(Error::SplitLeakage {
                        template: e.template.clone(),
                        first: first.to_string(),
                        second: split.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    seen.insert(&e.template, split);
                }
            }
        }
        Ok(())
    }

    pub fn templates(&self) -> BTreeSet<&str> {
        self.examples.iter().map(|e| e.template.as_str()).collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let out = self.to_jsonl()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads a JSONL dataset and validates every example against `def`.
///
/// Errors carry 1-based line numbers. Templates missing from the file are
/// derived with [`anonymize_template`].
pub fn load_dataset(path: impl AsRef<Path>, def: &SchemeDef) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, def)
}

pub fn parse_dataset(text: &str, def: &SchemeDef) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_err = |message: String| Error::DataLine {
            line: i + 1,
            message,
        };
        let mut ex: Example = serde_json::from_str(line).map_err(|e| line_err(e.to_string()))?;
        if ex.template.trim().is_empty() {
            ex.template = anonymize_template(&ex.sql);
        }
        ex.check_composition(def)
            .map_err(|e| line_err(e.to_string()))?;
        examples.push(ex);
    }
    let ds = Dataset { examples };
    ds.check_no_leakage()?;
    Ok(ds)
}

/// SQL with string literals and standalone numbers replaced by
/// placeholders.
pub fn anonymize_template(sql: &str) -> String {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = String::with_capacity(sql.len());
    let word = |c: char| c.is_alphanumeric() || c == '_';
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' || c == '\'' {
            let end = chars[i + 1..]
                .iter()
                .position(|&d| d == c)
                .map_or(chars.len(), |p| i + 1 + p);
            out.push(c);
            out.push_str("<str>");
            out.push(c);
            i = end + 1;
            continue;
        }
        let starts_number =
            c.is_ascii_digit() && (i == 0 || !word(chars[i - 1]) && chars[i - 1] != '.');
        if starts_number {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j == chars.len() || !word(chars[j]) {
                out.push_str("<num>");
                i = j;
                continue;
            }
        }
        out.push(c);
        i += 1;
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Templates whose text contains `substring` are kept out of training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateFamily {
    pub name: String,
    pub substring: String,
}

impl TemplateFamily {
    pub fn new(name: impl Into<String>, substring: impl Into<String>) -> Self {
        TemplateFamily {
            name: name.into(),
            substring: substring.into(),
        }
    }

    pub fn matches(&self, template: &str) -> bool {
        template.contains(&self.substring)
    }
}

/// Number of templates per split: largest-remainder apportionment of `n`
/// by `ratios`, ties going to the earlier split.
pub fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas = ratios.map(|r| r * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Assigns whole templates to train/dev/test.
///
/// Templates matching any of `forced` go to dev and test only (alternating,
/// dev first). Every split with a positive ratio receives at least one
/// template. The result depends only on the inputs and `seed`.
pub fn make_compositional_split(
    mut examples: Vec<Example>,
    ratios: [f64; 3],
    seed: u64,
    forced: &[TemplateFamily],
) -> Result<Dataset> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0)
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    for e in &mut examples {
        if e.template.trim().is_empty() {
            e.template = anonymize_template(&e.sql);
        }
    }
    let templates: BTreeSet<String> = examples.iter().map(|e| e.template.clone()).collect();
    let n = templates.len();
    let counts = apportion(n, ratios);
    if let Some(k) = (0..3).find(|&k| ratios[k] > 0.0 && counts[k] == 0) {
        return Err(Error::Data(format!(
            "{n} templates are too few for ratios {ratios:?} ({} gets none)",
            Split::ALL[k]
        )));
    }
    let (mut forced_t, mut free_t): (Vec<String>, Vec<String>) = templates
        .into_iter()
        .partition(|t| forced.iter().any(|f| f.matches(t)));
    if forced_t.len() > counts[1] + counts[2] {
        return Err(Error::Data(format!(
            "{} held-out templates do not fit in {} dev/test slots",
            forced_t.len(),
            counts[1] + counts[2]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    forced_t.shuffle(&mut rng);
    free_t.shuffle(&mut rng);

    let mut assign: BTreeMap<String, Split> = BTreeMap::new();
    let mut room = counts;
    let mut turn = 1;
    for t in forced_t {
        if room[turn] == 0 {
            turn = 3 - turn;
        }
        room[turn] -= 1;
        assign.insert(t, Split::ALL[turn]);
        turn = 3 - turn;
    }
    let mut free = free_t.into_iter();
    for (k, &slots) in room.iter().enumerate() {
        for t in free.by_ref().take(slots) {
            assign.insert(t, Split::ALL[k]);
        }
    }
    for e in &mut examples {
        e.split = Some(assign[&e.template]);
    }
    let ds = Dataset { examples };
    ds.check_no_leakage()?;
    Ok(ds)
}
