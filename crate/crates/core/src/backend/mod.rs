//! Scorer backends: the NLI / embedding / judge / tokenizer interface,
//! its HTTP wire encoding, a deterministic mock, and the [`Scorer`] client
//! that enforces the protocol contract on top of any backend.

mod http;
mod mock;
mod scorer;
pub mod wire;

use serde::{Deserialize, Serialize};

pub use http::{HttpBackend, RetryPolicy};
pub use mock::{MockBackend, MockFixtures};
pub use scorer::{truncate_premise, ClientOptions, Scorer};

use crate::error::BackendError;

/// Half-open token range in character offsets into the source text.
pub type TokenSpan = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
}

impl NliPair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

/// Class probabilities from an NLI cross-encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliTriple {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

/// Tolerance on the sum of an NLI triple.
pub const TRIPLE_SUM_TOLERANCE: f64 = 1e-3;

impl NliTriple {
    pub const fn new(entail: f64, neutral: f64, contradict: f64) -> Self {
        Self {
            entail,
            neutral,
            contradict,
        }
    }

    /// P(entail) - P(contradict).
    pub fn delta(&self) -> f64 {
        self.entail - self.contradict
    }

    pub fn check(&self) -> Result<(), String> {
        let parts = [self.entail, self.neutral, self.contradict];
        if parts.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(format!("probabilities out of [0,1]: {self:?}"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > TRIPLE_SUM_TOLERANCE {
            return Err(format!("probabilities sum to {sum}, not 1: {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub nli: bool,
    pub embed: bool,
    pub judge: bool,
    pub tokenize: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        nli: true,
        embed: true,
        judge: true,
        tokenize: true,
    };
}

/// Raw access to a scoring backend. Implementations only move data; the
/// [`Scorer`] client validates, normalizes, truncates and batches.
pub trait ScorerBackend: Send + Sync {
    /// Identifies the models behind this backend in reports.
    fn identifier(&self) -> String;

    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    /// Sequence limit of the NLI encoder, in tokenizer tokens.
    fn max_sequence_tokens(&self) -> usize;

    /// One triple per pair, order-aligned.
    fn nli_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliTriple>, BackendError>;

    /// One vector per text, order-aligned; not necessarily normalized.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;

    /// Raw verdict text for `candidate` against the accepted references.
    fn judge(&self, candidate: &str, references: &[String]) -> Result<String, BackendError>;

    /// Token spans per text.
    fn tokenize(&self, texts: &[String]) -> Result<Vec<Vec<TokenSpan>>, BackendError>;

    fn health(&self) -> Result<(), BackendError> {
        self.tokenize(&["ok".to_string()]).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        assert!((NliTriple::new(0.9, 0.0, 0.1).delta() - 0.8).abs() < 1e-12);
        assert_eq!(NliTriple::new(0.3, 0.4, 0.3).delta(), 0.0);
        assert_eq!(NliTriple::new(0.0, 0.0, 1.0).delta(), -1.0);
    }

    #[test]
    fn triple_check() {
        assert!(NliTriple::new(0.5, 0.2, 0.3).check().is_ok());
        assert!(NliTriple::new(0.5, 0.2, 0.1).check().is_err());
        assert!(NliTriple::new(1.2, -0.1, -0.1).check().is_err());
        assert!(NliTriple::new(f64::NAN, 0.5, 0.5).check().is_err());
        assert!(NliTriple::new(0.5, 0.2, 0.3005).check().is_ok());
    }
}
