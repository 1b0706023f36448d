//! Engine configuration: one JSON document whose every field has a
//! default, so partial files and partial overrides both work.

use serde::{Deserialize, Serialize};

use crate::backend::ClientOptions;
use crate::case::Domain;
use crate::correctness::{MatchConfig, Matcher, DEFAULT_TAU, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::grounding::GroundingOptions;
use crate::metrics::TaxonomyThresholds;
use crate::parser::{ParseOptions, MEDICAL_DIAGNOSES};
use crate::reward::{RewardWeights, SIGMA_FLOOR};

pub const DEFAULT_GROUP_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            level: 0.95,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub url: Option<String>,
    pub bearer_token: Option<String>,
    /// Use the in-process mock backend.
    pub mock: bool,
    pub mock_seed: u64,
    /// JSON file with mock fixture tables.
    pub mock_fixtures: Option<String>,
    pub max_batch: Option<usize>,
    pub parallelism: Option<usize>,
    pub truncation_reserve: Option<usize>,
    pub max_sequence_tokens: Option<usize>,
}

impl BackendConfig {
    pub fn client_options(&self) -> ClientOptions {
        let d = ClientOptions::default();
        ClientOptions {
            max_batch: self.max_batch.unwrap_or(d.max_batch),
            parallelism: self.parallelism.unwrap_or(d.parallelism),
            truncation_reserve: self.truncation_reserve.unwrap_or(d.truncation_reserve),
            max_sequence_tokens: self.max_sequence_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMatcher {
    Judge,
    Embedding,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Expected domain of every case; `None` accepts whatever the cases
    /// declare (a corpus must still be single-domain).
    pub domain: Option<Domain>,
    pub weights: RewardWeights,
    pub tau: f64,
    pub top_k: usize,
    pub group_size: usize,
    pub sigma_floor: f64,
    pub thresholds: TaxonomyThresholds,
    pub bootstrap: BootstrapConfig,
    pub backend: BackendConfig,
    pub strict_parse: bool,
    pub expected_diagnoses: usize,
    pub allow_extra_diagnoses: bool,
    pub include_name_in_hypothesis: bool,
    /// Correctness used for evaluation metrics; defaults to the judge for
    /// medical cases and exact match for legal ones.
    pub eval_matcher: Option<EvalMatcher>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            domain: None,
            weights: RewardWeights::default(),
            tau: DEFAULT_TAU,
            top_k: DEFAULT_TOP_K,
            group_size: DEFAULT_GROUP_SIZE,
            sigma_floor: SIGMA_FLOOR,
            thresholds: TaxonomyThresholds::default(),
            bootstrap: BootstrapConfig::default(),
            backend: BackendConfig::default(),
            strict_parse: false,
            expected_diagnoses: MEDICAL_DIAGNOSES,
            allow_extra_diagnoses: false,
            include_name_in_hypothesis: false,
            eval_matcher: None,
        }
    }
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a partial JSON object on top of this configuration.
    pub fn merged(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(self).expect("config serializes");
        merge(&mut base, overrides);
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::invalid(format!("config override: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.match_config().validate()?;
        if self.group_size < 2 {
            return Err(Error::invalid("group_size must be at least 2"));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::invalid("sigma_floor must be positive"));
        }
        self.thresholds.validate()?;
        if self.bootstrap.resamples == 0 || !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return Err(Error::invalid("bootstrap needs resamples >= 1 and 0 < level < 1"));
        }
        if self.expected_diagnoses == 0 {
            return Err(Error::invalid("expected_diagnoses must be at least 1"));
        }
        Ok(())
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            tau: self.tau,
            top_k: self.top_k,
        }
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            strict: self.strict_parse,
            expected_diagnoses: self.expected_diagnoses,
            allow_extra_diagnoses: self.allow_extra_diagnoses,
        }
    }

    pub fn grounding_options(&self) -> GroundingOptions {
        GroundingOptions {
            include_name: self.include_name_in_hypothesis,
        }
    }

    pub fn matcher_for(&self, domain: Domain) -> Matcher {
        let kind = self.eval_matcher.unwrap_or(match domain {
            Domain::Medical => EvalMatcher::Judge,
            Domain::Legal => EvalMatcher::Exact,
        });
        match kind {
            EvalMatcher::Judge => Matcher::Judge,
            EvalMatcher::Embedding => Matcher::Embedding { tau: self.tau },
            EvalMatcher::Exact => Matcher::Exact,
        }
    }
}

fn merge(base: &mut serde_json::Value, over: &serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}
