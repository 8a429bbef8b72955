use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use super::remote_protocol::{complete_sparse, ScoreRequest, ScoreResponse};
use super::{Distribution, LanguageModel, ScoreError, TokenId, Vocabulary};

/// Scores contexts with an external LM over `POST {endpoint}/score`.
///
/// Remote token strings are mapped to local ids through the shared vocabulary
/// plus an optional override table; strings that map nowhere count as the
/// unknown marker. A transport or protocol failure is reported as an error,
/// never replaced by a fallback distribution.
pub struct RemoteLmClient {
    endpoint: String,
    timeout: Duration,
    top_k: usize,
    vocab: Arc<Vocabulary>,
    mapping: HashMap<String, TokenId>,
    agent: ureq::Agent,
}

impl RemoteLmClient {
    pub fn new(endpoint: impl Into<String>, vocab: Arc<Vocabulary>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteLmClient {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            timeout,
            top_k: 50,
            vocab,
            mapping: HashMap::new(),
            agent,
        }
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    /// Maps a remote token string onto a local id, overriding the vocabulary
    /// lookup (e.g. `"Ġstate"` to `state`).
    pub fn map_token(mut self, remote: impl Into<String>, local: TokenId) -> Self {
        self.mapping.insert(remote.into(), local);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn fail(&self, context_len: usize, message: impl ToString) -> ScoreError {
        ScoreError::Remote {
            endpoint: self.endpoint.clone(),
            context_len,
            message: message.to_string(),
        }
    }
}

impl LanguageModel for RemoteLmClient {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Distribution, ScoreError> {
        let words = context
            .iter()
            .map(|&t| {
                self.vocab
                    .get_token(t)
                    .map(str::to_string)
                    .ok_or(ScoreError::TokenOutOfRange(t))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let request = ScoreRequest {
            context: words,
            top_k: self.top_k,
        };
        let url = format!("{}/score", self.endpoint);
        let mut response = self
            .agent
            .post(&url)
            .send_json(&request)
            .map_err(|e| self.fail(context.len(), e))?;
        let body: ScoreResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| self.fail(context.len(), format!("malformed response: {e}")))?;
        complete_sparse(&body.probs, self.vocab.len(), self.vocab.unk(), |s| {
            self.mapping.get(s).copied().or_else(|| self.vocab.id(s))
        })
        .map_err(|e| self.fail(context.len(), e))
    }
}
