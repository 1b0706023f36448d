//! Blocking HTTP client for a remote scorer backend.

use std::thread;
use std::time::Duration;

use serde::Serialize;
use ureq::Agent;

use super::wire::{self, JudgeRequest, Manifest};
use super::{Capabilities, NliPair, NliTriple, ScorerBackend, TokenSpan};
use crate::error::BackendError;

/// Retries apply to transport failures and 5xx/429 responses only; all
/// protocol endpoints are read-only, so repeating a request is safe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    agent: Agent,
    bearer: Option<String>,
    retry: RetryPolicy,
    identifier: String,
    capabilities: Capabilities,
    max_sequence_tokens: usize,
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(base_url: &str) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        let base_url = base_url.trim_end_matches('/').to_string();
        Self {
            identifier: format!("http:{base_url}"),
            base_url,
            agent,
            bearer: None,
            retry: RetryPolicy::default(),
            capabilities: Capabilities::ALL,
            max_sequence_tokens: 512,
        }
    }

    pub fn with_bearer_token(mut self, token: Option<String>) -> Self {
        self.bearer = token;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_sequence_tokens(mut self, n: usize) -> Self {
        self.max_sequence_tokens = n;
        self
    }

    /// Adopts identifier, capabilities and sequence limit from the
    /// backend's manifest.
    pub fn with_manifest(mut self) -> Result<Self, BackendError> {
        let body = self.call(wire::MANIFEST_PATH, None)?;
        let m: Manifest = serde_json::from_slice(&body).map_err(|e| BackendError::Protocol {
            endpoint: wire::MANIFEST_PATH.into(),
            message: e.to_string(),
        })?;
        self.identifier = m.identifier;
        self.capabilities = m.capabilities;
        self.max_sequence_tokens = m.max_sequence_tokens;
        Ok(self)
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<T: Serialize>(&self, path: &str, body: &T) -> Result<Vec<u8>, BackendError> {
        let bytes = serde_json::to_vec(body).expect("wire types serialize");
        self.call(path, Some(bytes))
    }

    fn call(&self, path: &str, body: Option<Vec<u8>>) -> Result<Vec<u8>, BackendError> {
        let url = format!("{}{}", self.base_url, path);
        let mut backoff = self.retry.initial_backoff;
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.once(&url, path, body.as_deref()) {
                Ok(bytes) => return Ok(bytes),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => last = msg,
            }
            if attempt < attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(BackendError::Transport {
            endpoint: url,
            attempts,
            message: last,
        })
    }

    fn once(&self, url: &str, path: &str, body: Option<&[u8]>) -> Result<Vec<u8>, Failure> {
        let result = match body {
            Some(bytes) => {
                let mut req = self.agent.post(url).header("content-type", "application/json");
                if let Some(token) = &self.bearer {
                    req = req.header("authorization", &format!("Bearer {token}"));
                }
                req.send(bytes)
            }
            None => {
                let mut req = self.agent.get(url);
                if let Some(token) = &self.bearer {
                    req = req.header("authorization", &format!("Bearer {token}"));
                }
                req.call()
            }
        };
        let mut resp = result.map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        match status {
            200..=299 => Ok(bytes),
            429 | 500..=599 => Err(Failure::Retryable(format!(
                "HTTP {status}: {}",
                String::from_utf8_lossy(&bytes)
            ))),
            _ => Err(Failure::Fatal(BackendError::Protocol {
                endpoint: path.to_string(),
                message: format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes)),
            })),
        }
    }
}

impl ScorerBackend for HttpBackend {
    fn identifier(&self) -> String {
        self.identifier.clone()
    }

    fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    fn max_sequence_tokens(&self) -> usize {
        self.max_sequence_tokens
    }

    fn nli_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliTriple>, BackendError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let body = self.post(wire::NLI_PATH, &wire::nli_request(pairs))?;
        wire::decode_nli_response(pairs.len(), &body)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = self.post(wire::EMBED_PATH, &wire::texts_request(texts))?;
        wire::decode_embed_response(texts.len(), &body)
    }

    fn judge(&self, candidate: &str, references: &[String]) -> Result<String, BackendError> {
        let req = JudgeRequest {
            id: "0".into(),
            candidate: candidate.to_string(),
            references: references.to_vec(),
        };
        let body = self.post(wire::JUDGE_PATH, &req)?;
        wire::decode_judge_response(&req.id, &body)
    }

    fn tokenize(&self, texts: &[String]) -> Result<Vec<Vec<TokenSpan>>, BackendError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = self.post(wire::TOKENIZE_PATH, &wire::texts_request(texts))?;
        wire::decode_tokenize_response(texts.len(), &body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn unreachable_backend_fails_after_retries() {
        // Port 9 on localhost is assumed closed.
        let b = HttpBackend::new("http://127.0.0.1:9").with_retry(RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(5),
        });
        let start = Instant::now();
        let err = b.judge("x", &["y".into()]).unwrap_err();
        match err {
            BackendError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
        // 5 ms + 10 ms of backoff between the three attempts.
        assert!(start.elapsed() >= Duration::from_millis(15));
    }

    #[test]
    fn empty_batches_skip_the_network() {
        let b = HttpBackend::new("http://127.0.0.1:9");
        assert!(b.nli_batch(&[]).unwrap().is_empty());
        assert!(b.embed_batch(&[]).unwrap().is_empty());
    }
}
