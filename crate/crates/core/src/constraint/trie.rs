use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::CandidateSet;
use crate::error::{Error, Result};
use crate::lm::{TokenId, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
struct Node {
    children: BTreeMap<TokenId, usize>,
    /// Surface form of the candidate that ends here.
    terminal: Option<String>,
}

/// Prefix tree over tokenized candidate values.
///
/// Terminal nodes admit the end-of-value marker, so allowed-token sets cover
/// the decision to stop as well as every way to continue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateTrie {
    nodes: Vec<Node>,
    eov: TokenId,
}

/// Builds the trie for `cands`. Values must tokenize to non-empty sequences
/// without unknown markers.
///
/// When several values share a token sequence (e.g. `None` and `none`) the
/// lexicographically smallest surface form is kept.
pub fn build_trie(cands: &CandidateSet, vocab: &Vocabulary) -> Result<CandidateTrie> {
    let mut trie = CandidateTrie {
        nodes: vec![Node::default()],
        eov: vocab.eov(),
    };
    for value in cands.values.keys() {
        let ids = vocab.tokenize(value);
        if ids.is_empty() {
            return Err(Error::Config(format!(
                "candidate `{value}` of clause `{}` tokenizes to nothing",
                cands.clause
            )));
        }
        if ids.contains(&vocab.unk()) {
            return Err(Error::Config(format!(
                "candidate `{value}` of clause `{}` has out-of-vocabulary words",
                cands.clause
            )));
        }
        trie.insert(&ids, value);
    }
    Ok(trie)
}

impl CandidateTrie {
    fn insert(&mut self, ids: &[TokenId], surface: &str) {
        let mut at = 0;
        for &t in ids {
            at = match self.nodes[at].children.get(&t) {
                Some(&next) => next,
                None => {
                    self.nodes.push(Node::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[at].children.insert(t, next);
                    next
                }
            };
        }
        let node = &mut self.nodes[at];
        match &node.terminal {
            Some(existing) if existing.as_str() <= surface => {}
            _ => node.terminal = Some(surface.to_string()),
        }
    }

    fn walk(&self, prefix: &[TokenId]) -> Option<usize> {
        let mut at = 0;
        for t in prefix {
            at = *self.nodes[at].children.get(t)?;
        }
        Some(at)
    }

    /// Tokens that extend `prefix` toward some candidate, plus end-of-value
    /// when `prefix` is itself a candidate. Empty when nothing matches.
    pub fn allowed_tokens(&self, prefix: &[TokenId]) -> BTreeSet<TokenId> {
        let Some(at) = self.walk(prefix) else {
            return BTreeSet::new();
        };
        let node = &self.nodes[at];
        let mut out: BTreeSet<TokenId> = node.children.keys().copied().collect();
        if node.terminal.is_some() {
            out.insert(self.eov);
        }
        out
    }

    /// Surface string of the candidate spelled exactly by `tokens`.
    pub fn surface(&self, tokens: &[TokenId]) -> Option<&str> {
        self.walk(tokens)
            .and_then(|at| self.nodes[at].terminal.as_deref())
    }

    pub fn is_candidate(&self, tokens: &[TokenId]) -> bool {
        self.surface(tokens).is_some()
    }

    /// Whether nothing at all is accepted.
    pub fn is_empty(&self) -> bool {
        self.nodes[0].children.is_empty() && self.nodes[0].terminal.is_none()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn eov(&self) -> TokenId {
        self.eov
    }

    /// Every accepted token sequence, in token-id order.
    pub fn accepted(&self) -> Vec<Vec<TokenId>> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((at, path)) = stack.pop() {
            let node = &self.nodes[at];
            if node.terminal.is_some() {
                out.push(path.clone());
            }
            for (&t, &child) in node.children.iter().rev() {
                let mut p = path.clone();
                p.push(t);
                stack.push((child, p));
            }
        }
        out.sort();
        out
    }
}
