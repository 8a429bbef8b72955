//! Prompts, slot filling, clause grammar and query composition.
//!
//! A clause value `v` is written into its prompt `p` as the canonical
//! utterance `"p v"`. The clause's grammar rule turns the canonical utterance
//! into SQL text (or a null clause for the value `None`) and [`compose`]
//! assembles the clauses of a scheme into one query.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::CandidateSources;

/// Literal slot value meaning "this clause is absent".
pub const NONE_VALUE: &str = "None";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClauseId(pub String);

impl ClauseId {
    pub fn new(id: impl Into<String>) -> Self {
        ClauseId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClauseId {
    fn from(s: &str) -> Self {
        ClauseId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// SELECT / FROM / WHERE / GROUP BY / ORDER BY.
    Geoquery,
    /// `SELECT * FROM ASINs WHERE <matching> [and <condition>]`.
    Ecommerce,
    /// The whole query as one slot; used when sequential filling is ablated.
    WholeQuery,
}

impl Scheme {
    /// Rules in the order their clauses appear in the composed query.
    pub fn composition_order(self) -> &'static [GrammarRule] {
        use GrammarRule::*;
        match self {
            Scheme::Geoquery => &[Select, From, Where, GroupBy, OrderBy],
            Scheme::Ecommerce => &[Matching, Condition],
            Scheme::WholeQuery => &[Verbatim],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrammarRule {
    From,
    Select,
    Where,
    GroupBy,
    OrderBy,
    Matching,
    Condition,
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependency {
    /// Context includes the clauses generated before this one.
    Sequential,
    /// Context is the utterance and the prompt only.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub clause: ClauseId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseSpec {
    pub id: ClauseId,
    /// 1-based position in generation order.
    pub ordinal: usize,
    pub prompt: String,
    pub nullable: bool,
    #[serde(default)]
    pub sources: CandidateSources,
    pub rule: GrammarRule,
    pub dependency: Dependency,
}

impl ClauseSpec {
    pub fn template(&self) -> PromptTemplate {
        PromptTemplate {
            clause: self.id.clone(),
            text: self.prompt.clone(),
        }
    }
}

/// A scheme together with its clause specifications; this is the content of
/// a scheme definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDef {
    pub scheme: Scheme,
    pub clauses: Vec<ClauseSpec>,
}

impl SchemeDef {
    pub fn validate(&self) -> Result<(), GrammarError> {
        let bad = |m: String| Err(GrammarError::Scheme(m));
        let n = self.clauses.len();
        if n == 0 {
            return bad("scheme has no clauses".into());
        }
        let mut ordinals: Vec<usize> = self.clauses.iter().map(|c| c.ordinal).collect();
        ordinals.sort_unstable();
        if ordinals != (1..=n).collect::<Vec<_>>() {
            return bad(format!(
                "ordinals {ordinals:?} are not a permutation of 1..={n}"
            ));
        }
        let mut ids = BTreeMap::new();
        for c in &self.clauses {
            if ids.insert(&c.id, ()).is_some() {
                return bad(format!("duplicate clause id `{}`", c.id));
            }
            if c.prompt.trim().is_empty() {
                return bad(format!("clause `{}` has an empty prompt", c.id));
            }
        }
        let mut rules: Vec<GrammarRule> = self.clauses.iter().map(|c| c.rule).collect();
        rules.sort();
        let mut expected = self.scheme.composition_order().to_vec();
        expected.sort();
        if rules != expected {
            return bad(format!(
                "{:?} scheme needs rules {expected:?}, got {rules:?}",
                self.scheme
            ));
        }
        let want = match self.scheme {
            Scheme::Geoquery => Some(Dependency::Sequential),
            Scheme::Ecommerce => Some(Dependency::Independent),
            Scheme::WholeQuery => None,
        };
        if let Some(want) = want {
            if let Some(c) = self.clauses.iter().find(|c| c.dependency != want) {
                return bad(format!(
                    "clause `{}` must be {want:?} under the {:?} scheme",
                    c.id, self.scheme
                ));
            }
        }
        Ok(())
    }

    /// Clauses sorted by generation ordinal.
    pub fn generation_order(&self) -> Vec<&ClauseSpec> {
        let mut v: Vec<&ClauseSpec> = self.clauses.iter().collect();
        v.sort_by_key(|c| c.ordinal);
        v
    }

    pub fn clause(&self, id: &ClauseId) -> Option<&ClauseSpec> {
        self.clauses.iter().find(|c| &c.id == id)
    }

    /// Five GeoQuery clauses generated FROM first, then SELECT, WHERE,
    /// GROUP BY and ORDER BY, each seeing the clauses before it.
    pub fn geoquery() -> Self {
        use crate::constraint::SchemaSource;
        let spec = |id: &str, ordinal, prompt: &str, nullable, rule, sources| ClauseSpec {
            id: id.into(),
            ordinal,
            prompt: prompt.into(),
            nullable,
            sources,
            rule,
            dependency: Dependency::Sequential,
        };
        SchemeDef {
            scheme: Scheme::Geoquery,
            clauses: vec![
                spec(
                    "from",
                    1,
                    "the sentence talks about",
                    false,
                    GrammarRule::From,
                    CandidateSources {
                        schema: Some(SchemaSource::Tables),
                        training: true,
                        ..Default::default()
                    },
                ),
                spec(
                    "select",
                    2,
                    "the sentence talks about",
                    false,
                    GrammarRule::Select,
                    CandidateSources {
                        schema: Some(SchemaSource::Columns),
                        training: true,
                        ..Default::default()
                    },
                ),
                spec(
                    "where",
                    3,
                    "the sentence requires",
                    true,
                    GrammarRule::Where,
                    CandidateSources {
                        training: true,
                        ..Default::default()
                    },
                ),
                spec(
                    "group_by",
                    4,
                    "the sentence requires to group by",
                    true,
                    GrammarRule::GroupBy,
                    CandidateSources {
                        schema: Some(SchemaSource::Columns),
                        training: true,
                        ..Default::default()
                    },
                ),
                spec(
                    "order_by",
                    5,
                    "the sentence requires the result to be ordered by",
                    true,
                    GrammarRule::OrderBy,
                    CandidateSources {
                        training: true,
                        ..Default::default()
                    },
                ),
            ],
        }
    }

    /// Matching and Condition clauses, generated independently.
    pub fn ecommerce() -> Self {
        SchemeDef {
            scheme: Scheme::Ecommerce,
            clauses: vec![
                ClauseSpec {
                    id: "matching".into(),
                    ordinal: 1,
                    prompt: "matching algorithm (".into(),
                    nullable: false,
                    sources: CandidateSources {
                        utterance: true,
                        training: true,
                        ..Default::default()
                    },
                    rule: GrammarRule::Matching,
                    dependency: Dependency::Independent,
                },
                ClauseSpec {
                    id: "condition".into(),
                    ordinal: 2,
                    prompt: "the condition is :".into(),
                    nullable: true,
                    sources: CandidateSources {
                        training: true,
                        ..Default::default()
                    },
                    rule: GrammarRule::Condition,
                    dependency: Dependency::Independent,
                },
            ],
        }
    }

    /// A single slot holding the whole query.
    pub fn whole_query() -> Self {
        SchemeDef {
            scheme: Scheme::WholeQuery,
            clauses: vec![ClauseSpec {
                id: "query".into(),
                ordinal: 1,
                prompt: "the sql query is".into(),
                nullable: false,
                sources: CandidateSources {
                    training: true,
                    ..Default::default()
                },
                rule: GrammarRule::Verbatim,
                dependency: Dependency::Independent,
            }],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("empty value for clause `{0}`")]
    EmptyValue(ClauseId),
    #[error("canonical utterance for `{got}` given to clause `{expected}`")]
    WrongClause { expected: ClauseId, got: ClauseId },
    #[error("malformed value for clause `{clause}`: {reason} in `{value}`")]
    Malformed {
        clause: ClauseId,
        value: String,
        reason: &'static str,
    },
    #[error("composition error: {0}")]
    Composition(String),
    #[error("invalid scheme: {0}")]
    Scheme(String),
}

/// A filled prompt: `prompt ++ " " ++ value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalUtterance {
    pub clause: ClauseId,
    pub prompt: String,
    pub value: String,
}

impl CanonicalUtterance {
    pub fn text(&self) -> String {
        format!("{} {}", self.prompt, self.value)
    }

    /// Recovers the value from canonical `text` written with `tmpl`.
    pub fn split(text: &str, tmpl: &PromptTemplate) -> Option<CanonicalUtterance> {
        let value = text.strip_prefix(tmpl.text.as_str())?.strip_prefix(' ')?;
        Some(CanonicalUtterance {
            clause: tmpl.clause.clone(),
            prompt: tmpl.text.clone(),
            value: value.to_string(),
        })
    }

    pub fn is_null(&self) -> bool {
        is_none_value(&self.value)
    }
}

pub fn is_none_value(value: &str) -> bool {
    value.trim().eq_ignore_ascii_case(NONE_VALUE)
}

pub fn fill_slot(tmpl: &PromptTemplate, value: &str) -> Result<CanonicalUtterance, GrammarError> {
    if value.trim().is_empty() {
        return Err(GrammarError::EmptyValue(tmpl.clause.clone()));
    }
    Ok(CanonicalUtterance {
        clause: tmpl.clause.clone(),
        prompt: tmpl.text.clone(),
        value: value.to_string(),
    })
}

/// One SQL clause; `sql` is `None` for an absent clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub id: ClauseId,
    pub rule: GrammarRule,
    pub sql: Option<String>,
}

fn check_balanced(clause: &ClauseId, value: &str) -> Result<(), GrammarError> {
    let malformed = |reason| {
        Err(GrammarError::Malformed {
            clause: clause.clone(),
            value: value.to_string(),
            reason,
        })
    };
    if !value.matches('"').count().is_multiple_of(2) {
        return malformed("unbalanced double quotes");
    }
    let mut depth = 0i32;
    let mut in_quote = false;
    for c in value.chars() {
        match c {
            '"' => in_quote = !in_quote,
            '(' if !in_quote => depth += 1,
            ')' if !in_quote => {
                depth -= 1;
                if depth < 0 {
                    return malformed("unbalanced parentheses");
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return malformed("unbalanced parentheses");
    }
    Ok(())
}

/// Applies the clause's grammar rule to a filled prompt.
pub fn clause_from_canonical(
    c: &CanonicalUtterance,
    spec: &ClauseSpec,
) -> Result<Clause, GrammarError> {
    if c.clause != spec.id {
        return Err(GrammarError::WrongClause {
            expected: spec.id.clone(),
            got: c.clause.clone(),
        });
    }
    let value = c.value.trim();
    if value.is_empty() {
        return Err(GrammarError::EmptyValue(spec.id.clone()));
    }
    let null = Clause {
        id: spec.id.clone(),
        rule: spec.rule,
        sql: None,
    };
    if c.is_null() {
        return Ok(null);
    }
    check_balanced(&spec.id, value)?;
    let sql = match spec.rule {
        GrammarRule::From => format!("FROM {value}"),
        GrammarRule::Select => format!("SELECT {value}"),
        GrammarRule::Where => format!("WHERE {value}"),
        GrammarRule::GroupBy => format!("GROUP BY {value}"),
        GrammarRule::OrderBy => format!("ORDER BY {value}"),
        GrammarRule::Matching => {
            if value.contains('"') {
                return Err(GrammarError::Malformed {
                    clause: spec.id.clone(),
                    value: value.to_string(),
                    reason: "quote inside a matching phrase",
                });
            }
            format!("Maching Algorithm(\"{value}\") == True")
        }
        GrammarRule::Condition | GrammarRule::Verbatim => value.to_string(),
    };
    Ok(Clause {
        sql: Some(sql),
        ..null
    })
}

fn collapse_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Joins clauses into the final query.
///
/// Input order does not matter; clauses are placed by rule. Null or absent
/// optional clauses are omitted.
pub fn compose(clauses: &[Clause], scheme: Scheme) -> Result<String, GrammarError> {
    let order = scheme.composition_order();
    let mut slots: BTreeMap<GrammarRule, Option<&str>> = BTreeMap::new();
    for c in clauses {
        if !order.contains(&c.rule) {
            return Err(GrammarError::Composition(format!(
                "clause `{}` ({:?}) does not belong to the {scheme:?} scheme",
                c.id, c.rule
            )));
        }
        if slots.insert(c.rule, c.sql.as_deref()).is_some() {
            return Err(GrammarError::Composition(format!(
                "{:?} clause given twice",
                c.rule
            )));
        }
    }
    let get = |r: GrammarRule| slots.get(&r).copied().flatten();
    let out = match scheme {
        Scheme::Geoquery => {
            for required in [GrammarRule::Select, GrammarRule::From] {
                if get(required).is_none() {
                    return Err(GrammarError::Composition(format!(
                        "a query needs a {required:?} clause"
                    )));
                }
            }
            order
                .iter()
                .filter_map(|&r| get(r))
                .collect::<Vec<_>>()
                .join(" ")
        }
        Scheme::Ecommerce => {
            let conds: Vec<&str> = order.iter().filter_map(|&r| get(r)).collect();
            if conds.is_empty() {
                "SELECT * FROM ASINs".to_string()
            } else {
                format!("SELECT * FROM ASINs WHERE {}", conds.join(" and "))
            }
        }
        Scheme::WholeQuery => get(GrammarRule::Verbatim)
            .ok_or_else(|| GrammarError::Composition("empty query".into()))?
            .to_string(),
    };
    Ok(collapse_spaces(&out))
}
