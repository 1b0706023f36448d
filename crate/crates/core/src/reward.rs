//! Combined reward and group-relative advantages.

use serde::{Deserialize, Serialize};

use crate::backend::Scorer;
use crate::case::{CaseRecord, Domain};
use crate::config::EngineConfig;
use crate::correctness::{embedding_correctness, exact_match, CorrectnessVerdict};
use crate::error::{Error, Result};
use crate::grounding::{ground_legal, grounding_reward_medical, GroundingReport};
use crate::parser::{format_reward, parse, ParsedOutput};

/// Standard-deviation floor used when a group's rewards (nearly) coincide.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_f: f64,
    pub w_c: f64,
    pub w_g: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_f: 1.0,
            w_c: 1.0,
            w_g: 2.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_f, self.w_c, self.w_g];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!("reward weights must be finite and >= 0: {self:?}")));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::invalid("at least one reward weight must be positive"));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.w_f + self.w_c + self.w_g
    }
}

/// `w_f·r_f + w_c·r_c + w_g·(r_g + 1)/2`.
pub fn combined_reward(r_f: f64, r_c: f64, r_g: f64, weights: &RewardWeights) -> Result<f64> {
    weights.validate()?;
    if r_f != 0.0 && r_f != 1.0 {
        return Err(Error::invalid(format!("format reward must be 0 or 1, got {r_f}")));
    }
    if !(0.0..=1.0).contains(&r_c) {
        return Err(Error::invalid(format!("correctness reward must be in [0, 1], got {r_c}")));
    }
    if !(-1.0..=1.0).contains(&r_g) {
        return Err(Error::invalid(format!("grounding reward must be in [-1, 1], got {r_g}")));
    }
    Ok(weights.w_f * r_f + weights.w_c * r_c + weights.w_g * normalize_grounding(r_g))
}

pub fn normalize_grounding(r_g: f64) -> f64 {
    (r_g + 1.0) / 2.0
}

/// `(r_i - mean) / max(std, sigma_floor)` with the population standard
/// deviation. A constant group yields exact zeros.
pub fn group_advantages(rewards: &[f64], sigma_floor: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::invalid(format!(
            "advantages need a group of at least 2 completions, got {}",
            rewards.len()
        )));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("rewards must be finite"));
    }
    let n = rewards.len() as f64;
    // Centre on the first reward so a constant group has exactly zero spread.
    let pivot = rewards[0];
    let mean_offset = rewards.iter().map(|r| r - pivot).sum::<f64>() / n;
    let centred: Vec<f64> = rewards.iter().map(|r| (r - pivot) - mean_offset).collect();
    let std = (centred.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    let scale = std.max(sigma_floor);
    Ok(centred.into_iter().map(|d| d / scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub case_id: String,
    pub completion_index: usize,
    pub r_f: f64,
    pub r_c: f64,
    pub r_g: f64,
    pub r_g_normalized: f64,
    pub combined: f64,
    pub advantage: f64,
}

/// Every intermediate of scoring one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCompletion {
    pub parsed: ParsedOutput,
    pub r_f: f64,
    pub r_c: f64,
    pub r_g: f64,
    pub combined: f64,
    pub correctness: Option<CorrectnessVerdict>,
    /// One report per graded prediction (top-k for medical).
    pub grounding: Vec<GroundingReport>,
}

pub fn score_completion(case: &CaseRecord, raw: &str, cfg: &EngineConfig, scorer: &Scorer) -> Result<ScoredCompletion> {
    let parsed = parse(case.domain, raw, &cfg.parse_options());
    score_parsed(case, parsed, cfg, scorer)
}

pub fn score_parsed(case: &CaseRecord, parsed: ParsedOutput, cfg: &EngineConfig, scorer: &Scorer) -> Result<ScoredCompletion> {
    let r_f = format_reward(&parsed);
    let (r_c, correctness, r_g, grounding) = match case.domain {
        Domain::Medical => {
            let labels: Vec<String> = parsed.predictions.iter().map(|p| p.label.clone()).collect();
            let verdict = embedding_correctness(&labels, &case.references, &cfg.match_config(), scorer)?;
            let g = grounding_reward_medical(case, &parsed.predictions, cfg.top_k, &cfg.grounding_options(), scorer)?;
            (verdict.fraction, Some(verdict), g.reward, g.reports)
        }
        Domain::Legal => match parsed.predictions.first() {
            Some(pred) => {
                let r_c = exact_match(&pred.label, &case.references[0])?;
                let report = ground_legal(case, &pred.reasoning, scorer)?;
                (r_c, None, report.max_score, vec![report])
            }
            None => (0.0, None, 0.0, Vec::new()),
        },
    };
    let combined = combined_reward(r_f, r_c, r_g, &cfg.weights)?;
    Ok(ScoredCompletion {
        parsed,
        r_f,
        r_c,
        r_g,
        combined,
        correctness,
        grounding,
    })
}

/// Scores a group of completions for one case and attaches advantages.
/// The group is all-or-nothing: any failure aborts it and names the
/// failing completion.
pub fn score_group(
    case: &CaseRecord,
    completions: &[String],
    cfg: &EngineConfig,
    scorer: &Scorer,
) -> Result<Vec<RewardRecord>> {
    if completions.len() < 2 {
        return Err(Error::invalid(format!(
            "a group needs at least 2 completions, got {}",
            completions.len()
        )));
    }
    if let Some(d) = cfg.domain {
        if d != case.domain {
            return Err(Error::invalid(format!(
                "case `{}` is {} but the engine is configured for {d}",
                case.id, case.domain
            )));
        }
    }
    case.validate()?;
    let scored = completions
        .iter()
        .enumerate()
        .map(|(index, raw)| {
            score_completion(case, raw, cfg, scorer).map_err(|e| Error::Completion {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rewards: Vec<f64> = scored.iter().map(|s| s.combined).collect();
    let advantages = group_advantages(&rewards, cfg.sigma_floor)?;
    Ok(scored
        .into_iter()
        .zip(advantages)
        .enumerate()
        .map(|(i, (s, advantage))| RewardRecord {
            case_id: case.id.clone(),
            completion_index: i,
            r_f: s.r_f,
            r_c: s.r_c,
            r_g: s.r_g,
            r_g_normalized: normalize_grounding(s.r_g),
            combined: s.combined,
            advantage,
        })
        .collect())
}
