//! Focus-then-verify grounding: the anchor context is paired with each
//! supplementary section and each retrieved passage, every pair is scored
//! by NLI against the reasoning text, and the per-premise deltas are
//! reduced to a signed max-magnitude score and a mean.

use serde::{Deserialize, Serialize};

use crate::backend::{NliPair, Scorer};
use crate::case::CaseRecord;
use crate::error::{Error, Result};
use crate::parser::Prediction;
use crate::sentences::split_sentences;

/// Joins the anchor with a section or passage.
pub const PREMISE_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "lowercase")]
pub enum PremiseSource {
    Anchor,
    Section(String),
    Evidence(usize),
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Premise {
    pub source: PremiseSource,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseSet {
    pub premises: Vec<Premise>,
    pub separator: String,
}

impl PremiseSet {
    pub fn texts(&self) -> Vec<String> {
        self.premises.iter().map(|p| p.text.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.premises.len()
    }

    pub fn is_empty(&self) -> bool {
        self.premises.is_empty()
    }
}

/// `anchor ⊕ section` for every section, then `anchor ⊕ passage` for
/// every retrieved passage; the anchor alone when there are neither.
pub fn build_premises(case: &CaseRecord) -> Result<PremiseSet> {
    if case.anchor.trim().is_empty() {
        return Err(Error::invalid(format!("case `{}` has an empty anchor", case.id)));
    }
    let join = |extra: &str| format!("{}{PREMISE_SEPARATOR}{extra}", case.anchor);
    let mut premises: Vec<Premise> = case
        .sections
        .iter()
        .map(|s| Premise {
            source: PremiseSource::Section(s.name.clone()),
            text: join(&s.text),
        })
        .collect();
    premises.extend(case.evidence.iter().enumerate().map(|(j, e)| Premise {
        source: PremiseSource::Evidence(j),
        text: join(e),
    }));
    if premises.is_empty() {
        premises.push(Premise {
            source: PremiseSource::Anchor,
            text: case.anchor.clone(),
        });
    }
    Ok(PremiseSet {
        premises,
        separator: PREMISE_SEPARATOR.to_string(),
    })
}

/// Per-premise deltas and their reductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub deltas: Vec<f64>,
    /// Delta with the largest magnitude, sign preserved.
    pub max_score: f64,
    /// First premise attaining the largest magnitude.
    pub argmax_premise: usize,
    pub avg_score: f64,
}

impl GroundingReport {
    pub fn from_deltas(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::invalid("grounding needs at least one premise"));
        }
        let mut argmax = 0;
        for (i, d) in deltas.iter().enumerate() {
            if d.abs() > deltas[argmax].abs() {
                argmax = i;
            }
        }
        let avg = deltas.iter().sum::<f64>() / deltas.len() as f64;
        Ok(Self {
            max_score: deltas[argmax],
            argmax_premise: argmax,
            avg_score: avg,
            deltas,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingOptions {
    /// Prefix each medical hypothesis with the diagnosis name.
    pub include_name: bool,
}

pub fn hypothesis_for(pred: &Prediction, opts: &GroundingOptions) -> String {
    if opts.include_name && !pred.label.trim().is_empty() {
        format!("{}: {}", pred.label.trim(), pred.reasoning)
    } else {
        pred.reasoning.clone()
    }
}

/// Scores every hypothesis against every premise in one NLI batch.
/// Blank hypotheses are not sent and get all-zero deltas.
fn score_matrix(premises: &[String], hypotheses: &[String], scorer: &Scorer) -> Result<Vec<Vec<f64>>> {
    let mut pairs = Vec::new();
    for h in hypotheses.iter().filter(|h| !h.trim().is_empty()) {
        for p in premises {
            pairs.push(NliPair::new(p.clone(), h.clone()));
        }
    }
    let triples = scorer.nli_batch(&pairs)?;
    let mut it = triples.iter();
    Ok(hypotheses
        .iter()
        .map(|h| {
            if h.trim().is_empty() {
                vec![0.0; premises.len()]
            } else {
                premises
                    .iter()
                    .map(|_| it.next().expect("one triple per pair").delta())
                    .collect()
            }
        })
        .collect())
}

pub fn ground_against(premises: &[String], hypothesis: &str, scorer: &Scorer) -> Result<GroundingReport> {
    let m = score_matrix(premises, &[hypothesis.to_string()], scorer)?;
    GroundingReport::from_deltas(m.into_iter().next().unwrap_or_default())
}

/// Grounds one reasoning text against the case's focused premises.
pub fn ground_prediction(case: &CaseRecord, reasoning: &str, scorer: &Scorer) -> Result<GroundingReport> {
    let premises = build_premises(case)?.texts();
    ground_against(&premises, reasoning, scorer)
}

/// Grounds several predictions of one completion with a single batch.
pub fn ground_predictions(
    case: &CaseRecord,
    predictions: &[Prediction],
    opts: &GroundingOptions,
    scorer: &Scorer,
) -> Result<Vec<GroundingReport>> {
    let premises = build_premises(case)?.texts();
    let hyps: Vec<String> = predictions.iter().map(|p| hypothesis_for(p, opts)).collect();
    score_matrix(&premises, &hyps, scorer)?
        .into_iter()
        .map(GroundingReport::from_deltas)
        .collect()
}

/// Mean NLI delta of each reasoning sentence against `premise`; 0 when the
/// reasoning has no sentences.
pub fn ground_prediction_sentencewise(reasoning: &str, premise: &str, scorer: &Scorer) -> Result<f64> {
    let sentences = split_sentences(reasoning);
    if sentences.is_empty() {
        return Ok(0.0);
    }
    let m = score_matrix(&[premise.to_string()], &sentences, scorer)?;
    Ok(m.iter().map(|row| row[0]).sum::<f64>() / sentences.len() as f64)
}

/// Premises for discrete-answer grounding: the gold passage when the case
/// has one, else the focused premise set.
pub fn legal_premises(case: &CaseRecord) -> Result<Vec<String>> {
    match &case.gold_passage {
        Some(g) if !g.trim().is_empty() => Ok(vec![g.clone()]),
        _ => Ok(build_premises(case)?.texts()),
    }
}

/// Sentence-wise grounding of `reasoning` against each legal premise; the
/// report's deltas are the per-premise sentence means.
pub fn ground_legal(case: &CaseRecord, reasoning: &str, scorer: &Scorer) -> Result<GroundingReport> {
    let premises = legal_premises(case)?;
    let sentences = split_sentences(reasoning);
    if sentences.is_empty() {
        return GroundingReport::from_deltas(vec![0.0; premises.len()]);
    }
    let m = score_matrix(&premises, &sentences, scorer)?;
    let deltas = (0..premises.len())
        .map(|j| m.iter().map(|row| row[j]).sum::<f64>() / sentences.len() as f64)
        .collect();
    GroundingReport::from_deltas(deltas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKGrounding {
    /// Mean of `max_score` over the top-k predictions.
    pub reward: f64,
    pub reports: Vec<GroundingReport>,
    /// Fewer than k predictions were available.
    pub short: bool,
}

/// Mean over the top-k predictions of each prediction's max-magnitude
/// grounding score. No predictions yields 0.
pub fn grounding_reward_medical(
    case: &CaseRecord,
    predictions: &[Prediction],
    k: usize,
    opts: &GroundingOptions,
    scorer: &Scorer,
) -> Result<TopKGrounding> {
    let top = &predictions[..k.min(predictions.len())];
    let reports = ground_predictions(case, top, opts, scorer)?;
    let reward = mean(reports.iter().map(|r| r.max_score)).unwrap_or(0.0);
    Ok(TopKGrounding {
        reward,
        short: top.len() < k,
        reports,
    })
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MockBackend, NliTriple};
    use crate::case::{Domain, Section};
    use std::sync::Arc;

    fn case(sections: &[&str], evidence: &[&str]) -> CaseRecord {
        CaseRecord {
            id: "c".into(),
            domain: Domain::Medical,
            anchor: "A".into(),
            sections: sections
                .iter()
                .enumerate()
                .map(|(i, t)| Section {
                    name: format!("S{}", i + 1),
                    text: t.to_string(),
                })
                .collect(),
            evidence: evidence.iter().map(|s| s.to_string()).collect(),
            references: vec!["x".into()],
            gold_passage: None,
        }
    }

    #[test]
    fn premise_construction() {
        let p = build_premises(&case(&["S1", "S2"], &["E1"])).unwrap();
        assert_eq!(p.texts(), vec!["A\n\nS1", "A\n\nS2", "A\n\nE1"]);
        assert_eq!(p.premises[2].source, PremiseSource::Evidence(0));
        assert_eq!(build_premises(&case(&[], &[])).unwrap().texts(), vec!["A"]);
        assert_eq!(
            build_premises(&case(&[], &["E1", "E2", "E3"])).unwrap().texts(),
            vec!["A\n\nE1", "A\n\nE2", "A\n\nE3"]
        );
        let mut bad = case(&[], &[]);
        bad.anchor = " ".into();
        assert!(build_premises(&bad).is_err());
    }

    #[test]
    fn report_reductions() {
        let r = GroundingReport::from_deltas(vec![0.3, -0.7, 0.5]).unwrap();
        assert_eq!((r.max_score, r.argmax_premise), (-0.7, 1));
        assert!((r.avg_score - 0.1 / 3.0).abs() < 1e-12);

        let r = GroundingReport::from_deltas(vec![0.42]).unwrap();
        assert_eq!((r.max_score, r.argmax_premise, r.avg_score), (0.42, 0, 0.42));

        let r = GroundingReport::from_deltas(vec![0.5, -0.5]).unwrap();
        assert_eq!((r.max_score, r.argmax_premise, r.avg_score), (0.5, 0, 0.0));

        assert!(GroundingReport::from_deltas(vec![]).is_err());
    }

    fn scorer_with(pairs: &[(&str, &str, f64)]) -> Scorer {
        let mut m = MockBackend::default();
        for (p, h, d) in pairs {
            // entail - contradict = d with neutral 0
            let e = (1.0 + d) / 2.0;
            m = m.with_nli(p, h, NliTriple::new(e, 0.0, 1.0 - e));
        }
        Scorer::new(Arc::new(m))
    }

    #[test]
    fn sentencewise_means() {
        let s = scorer_with(&[("P", "First claim here.", 0.6), ("P", "Second claim here.", 0.2)]);
        let v = ground_prediction_sentencewise("First claim here. Second claim here.", "P", &s).unwrap();
        assert!((v - 0.4).abs() < 1e-12);

        let s = scorer_with(&[("P", "Only one.", -0.3)]);
        assert!((ground_prediction_sentencewise("Only one.", "P", &s).unwrap() + 0.3).abs() < 1e-12);

        let s = scorer_with(&[("P", "One a.", 0.9), ("P", "Two b.", 0.9), ("P", "Three c.", -0.9)]);
        let v = ground_prediction_sentencewise("One a. Two b. Three c.", "P", &s).unwrap();
        assert!((v - 0.3).abs() < 1e-12);

        assert_eq!(ground_prediction_sentencewise("  ", "P", &s).unwrap(), 0.0);
    }

    #[test]
    fn medical_topk_mean() {
        let c = case(&["S1"], &[]);
        let preds: Vec<Prediction> = ["r1", "r2", "r3", "r4"]
            .iter()
            .enumerate()
            .map(|(i, r)| Prediction {
                label: format!("d{i}"),
                reasoning: r.to_string(),
                rank: i + 1,
            })
            .collect();
        let s = scorer_with(&[("A\n\nS1", "r1", 0.93), ("A\n\nS1", "r2", -0.35), ("A\n\nS1", "r3", 0.14)]);
        let g = grounding_reward_medical(&c, &preds, 3, &GroundingOptions::default(), &s).unwrap();
        assert!((g.reward - 0.24).abs() < 1e-12);
        assert!(!g.short);
        let g = grounding_reward_medical(&c, &preds[..1], 3, &GroundingOptions::default(), &s).unwrap();
        assert!(g.short);
        assert!((g.reward - 0.93).abs() < 1e-12);
        let g = grounding_reward_medical(&c, &[], 3, &GroundingOptions::default(), &s).unwrap();
        assert_eq!(g.reward, 0.0);
    }

    #[test]
    fn include_name_changes_hypothesis() {
        let p = Prediction {
            label: "Heart failure".into(),
            reasoning: "edema".into(),
            rank: 1,
        };
        assert_eq!(hypothesis_for(&p, &GroundingOptions::default()), "edema");
        assert_eq!(
            hypothesis_for(&p, &GroundingOptions { include_name: true }),
            "Heart failure: edema"
        );
    }

    #[test]
    fn blank_reasoning_is_neutral() {
        let s = Scorer::new(Arc::new(MockBackend::default()));
        let c = case(&["S1", "S2"], &[]);
        let r = ground_prediction(&c, " ", &s).unwrap();
        assert_eq!(r.deltas, vec![0.0, 0.0]);
    }

    #[test]
    fn legal_uses_gold_passage() {
        let mut c = case(&[], &["E1"]);
        c.gold_passage = Some("G".into());
        assert_eq!(legal_premises(&c).unwrap(), vec!["G"]);
        c.gold_passage = None;
        assert_eq!(legal_premises(&c).unwrap(), vec!["A\n\nE1"]);
    }
}
