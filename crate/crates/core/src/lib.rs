//! Reward scoring and evaluation for evidence-grounded LLM completions.
//!
//! The crate parses structured completions, scores them for format,
//! correctness and grounding against a case's evidence, turns a group of
//! rewards into group-relative advantages, and aggregates rollout corpora
//! into taxonomy and grounding metrics. Every learned scorer (NLI,
//! embeddings, judge, tokenizer) sits behind [`backend::ScorerBackend`];
//! [`backend::MockBackend`] is a deterministic in-process implementation.

pub mod backend;
pub mod case;
pub mod config;
pub mod correctness;
pub mod error;
pub mod grounding;
pub mod metrics;
pub mod parser;
pub mod retrieval;
pub mod reward;
pub mod sc;
pub mod sentences;

pub use backend::{MockBackend, Scorer, ScorerBackend};
pub use case::{CaseRecord, Domain, Rollout, Section};
pub use config::EngineConfig;
pub use error::{BackendError, Error, Result};
pub use parser::{ParseOptions, ParsedOutput, Prediction};
pub use reward::{RewardRecord, RewardWeights};
