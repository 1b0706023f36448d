//! Correctness of predictions against reference answers: embedding
//! similarity above a threshold, exact answer-letter match, or an LLM
//! judge verdict.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backend::Scorer;
use crate::error::{Error, Result};
use crate::parser::normalize_letter;

pub const DEFAULT_TAU: f64 = 0.80;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// A prediction matches when its best cosine similarity is strictly
    /// greater than `tau`.
    pub tau: f64,
    pub top_k: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            top_k: DEFAULT_TOP_K,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatch {
    pub matched: bool,
    pub best_similarity: f64,
    pub best_reference: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessVerdict {
    pub per_prediction: Vec<PredictionMatch>,
    /// Matched share of the evaluated predictions; 0 when none were
    /// evaluated.
    pub fraction: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine of two vectors the client already normalized.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of every prediction against every reference, with
/// all distinct texts embedded in one batch.
pub fn similarity_matrix(predictions: &[String], references: &[String], scorer: &Scorer) -> Result<Vec<Vec<f64>>> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut texts = Vec::new();
    for t in predictions.iter().chain(references) {
        slot.entry(t.as_str()).or_insert_with(|| {
            texts.push(t.clone());
            texts.len() - 1
        });
    }
    let vectors = scorer.embed_batch(&texts)?;
    Ok(predictions
        .iter()
        .map(|p| {
            let pv = &vectors[slot[p.as_str()]];
            references
                .iter()
                .map(|r| dot(pv, &vectors[slot[r.as_str()]]).clamp(-1.0, 1.0))
                .collect()
        })
        .collect())
}

/// Matches the first `cfg.top_k` predictions against the references by
/// embedding similarity.
pub fn embedding_correctness(
    predictions: &[String],
    references: &[String],
    cfg: &MatchConfig,
    scorer: &Scorer,
) -> Result<CorrectnessVerdict> {
    cfg.validate()?;
    if references.is_empty() {
        return Err(Error::invalid("embedding correctness needs at least one reference"));
    }
    let top = &predictions[..cfg.top_k.min(predictions.len())];
    if top.is_empty() {
        return Ok(CorrectnessVerdict {
            per_prediction: Vec::new(),
            fraction: 0.0,
        });
    }
    let sims = similarity_matrix(top, references, scorer)?;
    let per_prediction: Vec<PredictionMatch> = sims
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, s) in row.iter().enumerate() {
                if *s > row[best] {
                    best = j;
                }
            }
            PredictionMatch {
                matched: row[best] > cfg.tau,
                best_similarity: row[best],
                best_reference: best,
            }
        })
        .collect();
    let hits = per_prediction.iter().filter(|m| m.matched).count();
    Ok(CorrectnessVerdict {
        fraction: hits as f64 / per_prediction.len() as f64,
        per_prediction,
    })
}

/// 1 when the two answer letters agree after case normalization.
pub fn exact_match(answer: &str, gold: &str) -> Result<f64> {
    let a = normalize_letter(answer)
        .ok_or_else(|| Error::invalid(format!("answer {answer:?} is not a letter A-D")))?;
    let g = normalize_letter(gold)
        .ok_or_else(|| Error::invalid(format!("gold {gold:?} is not a letter A-D")))?;
    Ok(if a == g { 1.0 } else { 0.0 })
}

/// Interprets a judge reply: `TRUE` / `FALSE`, case-insensitive, after
/// trimming whitespace and surrounding quotes.
pub fn parse_verdict(raw: &str) -> Result<bool> {
    let v = raw
        .trim()
        .trim_matches(|c: char| matches!(c, '\'' | '"' | '`'))
        .trim();
    if v.eq_ignore_ascii_case("true") {
        Ok(true)
    } else if v.eq_ignore_ascii_case("false") {
        Ok(false)
    } else {
        Err(Error::JudgeVerdict {
            verdict: raw.to_string(),
        })
    }
}

/// Evaluation-time correctness via the judge backend.
pub fn judge_correctness(candidate: &str, references: &[String], scorer: &Scorer) -> Result<bool> {
    parse_verdict(&scorer.judge(candidate, references)?)
}

/// How predictions are matched to references when computing metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Matcher {
    Judge,
    Embedding { tau: f64 },
    Exact,
}

/// `m[i][j]` is true when prediction `i` matches reference `j`.
pub fn match_matrix(
    predictions: &[String],
    references: &[String],
    matcher: Matcher,
    scorer: &Scorer,
) -> Result<Vec<Vec<bool>>> {
    if predictions.is_empty() {
        return Ok(Vec::new());
    }
    match matcher {
        Matcher::Exact => predictions
            .iter()
            .map(|p| {
                references
                    .iter()
                    .map(|r| Ok(normalize_letter(p).is_some() && exact_match(p, r)? == 1.0))
                    .collect()
            })
            .collect(),
        Matcher::Embedding { tau } => Ok(similarity_matrix(predictions, references, scorer)?
            .into_iter()
            .map(|row| row.into_iter().map(|s| s > tau).collect())
            .collect()),
        Matcher::Judge => predictions
            .iter()
            .map(|p| {
                references
                    .iter()
                    .map(|r| judge_correctness(p, std::slice::from_ref(r), scorer))
                    .collect()
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use std::sync::Arc;

    fn unit(angle_cos: f64) -> Vec<f64> {
        vec![angle_cos, (1.0 - angle_cos * angle_cos).sqrt()]
    }

    fn scorer() -> Scorer {
        let m = MockBackend::default()
            .with_embedding("ref", vec![1.0, 0.0])
            .with_embedding("close", unit(0.85))
            .with_embedding("edge", vec![4.0, 3.0])
            .with_embedding("far", unit(0.2));
        Scorer::new(Arc::new(m))
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn threshold_is_strict() {
        let cfg = MatchConfig::default();
        let v = embedding_correctness(&strings(&["close", "edge", "ref"]), &strings(&["ref"]), &cfg, &scorer()).unwrap();
        assert!(v.per_prediction[0].matched);
        assert!((v.per_prediction[0].best_similarity - 0.85).abs() < 1e-12);
        assert!(!v.per_prediction[1].matched, "exactly tau must not match");
        assert!(v.per_prediction[2].matched);
        assert!((v.fraction - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn only_top_k_counted() {
        let cfg = MatchConfig { tau: 0.8, top_k: 2 };
        let v = embedding_correctness(&strings(&["far", "ref", "ref"]), &strings(&["ref"]), &cfg, &scorer()).unwrap();
        assert_eq!(v.per_prediction.len(), 2);
        assert_eq!(v.fraction, 0.5);
    }

    #[test]
    fn identical_strings_match_under_random_embeddings() {
        let s = Scorer::new(Arc::new(MockBackend::new(3)));
        let v = embedding_correctness(
            &strings(&["Acute MI"]),
            &strings(&["Heart failure", "Acute MI"]),
            &MatchConfig { tau: 0.999, top_k: 3 },
            &s,
        )
        .unwrap();
        assert!(v.per_prediction[0].matched);
        assert_eq!(v.per_prediction[0].best_reference, 1);
    }

    #[test]
    fn empty_references_rejected() {
        assert!(embedding_correctness(&strings(&["x"]), &[], &MatchConfig::default(), &scorer()).is_err());
        assert!(MatchConfig { tau: 0.0, top_k: 3 }.validate().is_err());
        assert!(MatchConfig { tau: 0.5, top_k: 0 }.validate().is_err());
    }

    #[test]
    fn exact_match_truth_table() {
        let letters = ["A", "B", "C", "D"];
        for a in letters {
            for g in letters {
                let want = if a == g { 1.0 } else { 0.0 };
                assert_eq!(exact_match(a, g).unwrap(), want);
                assert_eq!(exact_match(&a.to_lowercase(), g).unwrap(), want);
            }
        }
        assert!(exact_match("E", "A").is_err());
        assert!(exact_match("A", "").is_err());
    }

    #[test]
    fn verdict_normalization() {
        for t in ["TRUE", "true", " True\n", "'TRUE'", "`true`"] {
            assert!(parse_verdict(t).unwrap(), "{t:?}");
        }
        for f in ["FALSE", "false\n", "  False "] {
            assert!(!parse_verdict(f).unwrap(), "{f:?}");
        }
        match parse_verdict("maybe") {
            Err(Error::JudgeVerdict { verdict }) => assert_eq!(verdict, "maybe"),
            other => panic!("{other:?}"),
        }
        assert!(parse_verdict("TRUE.").is_err());
    }

    #[test]
    fn judge_through_mock() {
        let s = Scorer::new(Arc::new(MockBackend::default().with_verdict("MI", "TRUE")));
        assert!(judge_correctness("MI", &strings(&["Myocardial infarction"]), &s).unwrap());
        assert!(!judge_correctness("Stroke", &strings(&["Myocardial infarction"]), &s).unwrap());
    }

    #[test]
    fn match_matrix_variants() {
        let m = match_matrix(&strings(&["b", "E"]), &strings(&["B"]), Matcher::Exact, &scorer()).unwrap();
        assert_eq!(m, vec![vec![true], vec![false]]);
        let m = match_matrix(&strings(&["close", "far"]), &strings(&["ref"]), Matcher::Embedding { tau: 0.8 }, &scorer()).unwrap();
        assert_eq!(m, vec![vec![true], vec![false]]);
    }
}
