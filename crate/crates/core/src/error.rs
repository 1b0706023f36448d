use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised while talking to a scorer backend.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s) calling {endpoint}: {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("protocol error from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },
    #[error("backend `{backend}` does not support `{capability}`")]
    Unsupported {
        backend: String,
        capability: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("NLI call failed for pair {pair}: {source}")]
    Pair {
        pair: usize,
        #[source]
        source: BackendError,
    },

    #[error("hypothesis `{hypothesis}` has {tokens} tokens, which does not fit the {limit}-token limit")]
    HypothesisTooLong {
        hypothesis: String,
        tokens: usize,
        limit: usize,
    },

    #[error("judge returned an unrecognized verdict: {verdict:?}")]
    JudgeVerdict { verdict: String },

    #[error("scoring completion {index} failed: {source}")]
    Completion {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True when the failure originates in a scorer backend rather than in
    /// caller-supplied input.
    pub fn is_backend(&self) -> bool {
        match self {
            Error::Backend(_) | Error::Pair { .. } | Error::JudgeVerdict { .. } => true,
            Error::Completion { source, .. } => source.is_backend(),
            _ => false,
        }
    }
}
