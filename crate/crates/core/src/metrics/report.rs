//! Corpus-level evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, ConfidenceInterval};
use super::taxonomy::{classify_with, TaxonomyCounts, TaxonomyLabel, TaxonomyRates};
use crate::backend::Scorer;
use crate::case::{CaseRecord, Domain, Rollout};
use crate::config::EngineConfig;
use crate::correctness::{exact_match, match_matrix};
use crate::error::{Error, Result};
use crate::grounding::{ground_legal, ground_predictions, mean, GroundingReport};
use crate::parser::{parse, ParsedOutput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfAtK {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 over the first `k` rows of `matches`.
///
/// Rows are predictions in rank order, columns are references. Each
/// prediction claims the first still-unclaimed reference it matches, so
/// no reference is counted twice. Precision divides by `k` even when
/// fewer predictions are present.
pub fn f1_at_k(matches: &[Vec<bool>], n_references: usize, k: usize) -> Result<PrfAtK> {
    if k == 0 || n_references == 0 {
        return Err(Error::invalid("f1@k needs k >= 1 and at least one reference"));
    }
    let mut claimed = vec![false; n_references];
    let mut hits = 0usize;
    for row in matches.iter().take(k) {
        if row.len() != n_references {
            return Err(Error::invalid("match row length differs from reference count"));
        }
        if let Some(j) = (0..n_references).find(|&j| row[j] && !claimed[j]) {
            claimed[j] = true;
            hits += 1;
        }
    }
    let precision = hits as f64 / k as f64;
    let recall = hits as f64 / n_references as f64;
    let f1 = if hits == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrfAtK { precision, recall, f1 })
}

/// Mean of `avg_score` and of `max_score` over the first `k` reports.
pub fn grounding_at_k(reports: &[GroundingReport], k: usize) -> Option<(f64, f64)> {
    let top = &reports[..k.min(reports.len())];
    Some((
        mean(top.iter().map(|r| r.avg_score))?,
        mean(top.iter().map(|r| r.max_score))?,
    ))
}

/// Everything measured for one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionEval {
    pub case_id: String,
    pub completion_index: usize,
    pub format_valid: bool,
    /// F1@k for medical, 0/1 accuracy for legal.
    pub score: f64,
    pub prf: Option<PrfAtK>,
    pub g_avg: f64,
    pub g_max: f64,
    pub labels: Vec<TaxonomyLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub domain: Domain,
    pub backend: String,
    pub k: usize,
    pub n_cases: usize,
    pub n_completions: usize,
    pub format_valid_rate: f64,
    /// F1@k for medical, accuracy for legal; percentages.
    pub primary_metric: String,
    pub primary: ConfidenceInterval,
    pub precision: Option<ConfidenceInterval>,
    pub recall: Option<ConfidenceInterval>,
    /// Grounding scores rescaled by 100 for tables.
    pub g_avg: ConfidenceInterval,
    pub g_max: ConfidenceInterval,
    /// Same, on the raw [-1, 1] scale.
    pub g_avg_raw: f64,
    pub g_max_raw: f64,
    pub counts: TaxonomyCounts,
    pub rates: Option<TaxonomyRates>,
    pub faithfulness: Option<f64>,
    pub bootstrap_resamples: usize,
    pub bootstrap_level: f64,
    pub bootstrap_seed: u64,
    pub completions: Vec<CompletionEval>,
}

pub fn csv_header(domain: Domain, k: usize) -> String {
    let first = match domain {
        Domain::Medical => format!("F1@{k}"),
        Domain::Legal => "Acc".to_string(),
    };
    format!("method,{first},G_avg@{k},G_max@{k},EB,H,W,LG,F")
}

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

impl MetricsReport {
    /// One CSV row; F is `NA` when no prediction was correct.
    pub fn csv_row(&self, method: &str) -> String {
        let rates = self.rates;
        let cell = |f: fn(&TaxonomyRates) -> f64| rates.as_ref().map_or("NA".to_string(), |r| num(f(r)));
        let method = if method.contains([',', '"', '\n']) {
            format!("\"{}\"", method.replace('"', "\"\""))
        } else {
            method.to_string()
        };
        format!(
            "{method},{},{},{},{},{},{},{},{}",
            num(self.primary.mean),
            num(self.g_avg.mean),
            num(self.g_max.mean),
            cell(|r| r.evidence_based),
            cell(|r| r.hallucination),
            cell(|r| r.weak),
            cell(|r| r.lucky_guess),
            self.faithfulness.map_or("NA".to_string(), |f| num(100.0 * f)),
        )
    }

    pub fn to_csv(&self, method: &str) -> String {
        format!("{}\n{}\n", csv_header(self.domain, self.k), self.csv_row(method))
    }
}

/// Score, precision/recall, g_avg, g_max and the top-k labels.
type CompletionScores = (f64, Option<PrfAtK>, f64, f64, Vec<TaxonomyLabel>);

fn evaluate_completion(
    case: &CaseRecord,
    parsed: &ParsedOutput,
    cfg: &EngineConfig,
    scorer: &Scorer,
) -> Result<CompletionScores> {
    let k = cfg.top_k;
    let thresholds = &cfg.thresholds;
    match case.domain {
        Domain::Medical => {
            let top = parsed.top_k(k);
            let labels: Vec<String> = top.iter().map(|p| p.label.clone()).collect();
            let matches = match_matrix(&labels, &case.references, cfg.matcher_for(Domain::Medical), scorer)?;
            let prf = f1_at_k(&matches, case.references.len(), k)?;
            let reports = ground_predictions(case, top, &cfg.grounding_options(), scorer)?;
            let (g_avg, g_max) = grounding_at_k(&reports, k).unwrap_or((0.0, 0.0));
            let tax = matches
                .iter()
                .zip(&reports)
                .map(|(row, rep)| classify_with(row.iter().any(|m| *m), rep.max_score, thresholds))
                .collect::<Result<Vec<_>>>()?;
            Ok((prf.f1, Some(prf), g_avg, g_max, tax))
        }
        Domain::Legal => {
            let Some(pred) = parsed.predictions.first() else {
                return Ok((0.0, None, 0.0, 0.0, Vec::new()));
            };
            let correct = exact_match(&pred.label, &case.references[0])? == 1.0;
            let rep = ground_legal(case, &pred.reasoning, scorer)?;
            let label = classify_with(correct, rep.max_score, thresholds)?;
            Ok((if correct { 1.0 } else { 0.0 }, None, rep.avg_score, rep.max_score, vec![label]))
        }
    }
}

/// Scores every completion of every rollout against its case and
/// aggregates per-case means into bootstrap intervals.
///
/// Rollouts are processed in case-id order; completions of the same case
/// are averaged before resampling so cases weigh equally.
pub fn evaluate_corpus(
    cases: &[CaseRecord],
    rollouts: &[Rollout],
    cfg: &EngineConfig,
    scorer: &Scorer,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let by_id: BTreeMap<&str, &CaseRecord> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut grouped: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut domain = cfg.domain;
    for r in rollouts {
        let case = by_id
            .get(r.case_id.as_str())
            .ok_or_else(|| Error::invalid(format!("rollout refers to unknown case {:?}", r.case_id)))?;
        match domain {
            Some(d) if d != case.domain => {
                return Err(Error::invalid(format!(
                    "mixed domains: case {:?} is {} but the run is {d}",
                    case.id, case.domain
                )))
            }
            _ => domain = Some(case.domain),
        }
        grouped
            .entry(r.case_id.as_str())
            .or_default()
            .extend(r.completions.iter().map(String::as_str));
    }
    let domain = domain.ok_or_else(|| Error::invalid("nothing to evaluate"))?;
    if grouped.values().all(|c| c.is_empty()) {
        return Err(Error::invalid("nothing to evaluate"));
    }

    let opts = cfg.parse_options();
    let mut completions = Vec::new();
    let mut per_case: Vec<[f64; 5]> = Vec::new();
    let mut counts = TaxonomyCounts::default();
    let mut valid = 0usize;
    for (case_id, raws) in &grouped {
        if raws.is_empty() {
            continue;
        }
        let case = by_id[case_id];
        let mut acc = [0.0; 5];
        for (index, raw) in raws.iter().enumerate() {
            let parsed = parse(domain, raw, &opts);
            let (score, prf, g_avg, g_max, labels) = evaluate_completion(case, &parsed, cfg, scorer)
                .map_err(|e| Error::Completion { index, source: Box::new(e) })?;
            valid += parsed.format_valid as usize;
            labels.iter().for_each(|l| counts.add(*l));
            let (p, r) = prf.map_or((0.0, 0.0), |x| (x.precision, x.recall));
            for (slot, v) in acc.iter_mut().zip([score, p, r, g_avg, g_max]) {
                *slot += v;
            }
            completions.push(CompletionEval {
                case_id: case.id.clone(),
                completion_index: index,
                format_valid: parsed.format_valid,
                score,
                prf,
                g_avg,
                g_max,
                labels,
            });
        }
        per_case.push(acc.map(|v| v / raws.len() as f64));
    }

    let medical = domain == Domain::Medical;
    let b = &cfg.bootstrap;
    let ci = |i: usize| -> Result<ConfidenceInterval> {
        let col: Vec<f64> = per_case.iter().map(|row| row[i]).collect();
        bootstrap_ci(&col, b.level, b.resamples, b.seed)
    };
    let g_avg = ci(3)?;
    let g_max = ci(4)?;
    Ok(MetricsReport {
        domain,
        backend: scorer.identifier(),
        k: if medical { cfg.top_k } else { 1 },
        n_cases: per_case.len(),
        n_completions: completions.len(),
        format_valid_rate: valid as f64 / completions.len() as f64,
        primary_metric: if medical { format!("f1@{}", cfg.top_k) } else { "accuracy".into() },
        primary: ci(0)?.scaled(100.0),
        precision: if medical { Some(ci(1)?.scaled(100.0)) } else { None },
        recall: if medical { Some(ci(2)?.scaled(100.0)) } else { None },
        g_avg: g_avg.scaled(100.0),
        g_max: g_max.scaled(100.0),
        g_avg_raw: g_avg.mean,
        g_max_raw: g_max.mean,
        rates: counts.rates(),
        faithfulness: counts.faithfulness(),
        counts,
        bootstrap_resamples: b.resamples,
        bootstrap_level: b.level,
        bootstrap_seed: b.seed,
        completions,
    })
}
