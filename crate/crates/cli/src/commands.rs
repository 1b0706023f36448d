//! Command bodies, independent of argument parsing and process exit.

use std::collections::HashMap;

use evidence_reward::case::{parse_cases, parse_jsonl, parse_line};
use evidence_reward::metrics::{evaluate_corpus, MetricsReport};
use evidence_reward::parser::parse;
use evidence_reward::retrieval::{index_corpus, parse_corpus, query, Hit, VectorIndex};
use evidence_reward::reward::score_group;
use evidence_reward::sc::{aggregate, ScConfig, ScResult};
use evidence_reward::{CaseRecord, Domain, EngineConfig, Error, ParsedOutput, RewardRecord, Rollout, Scorer};
use serde::Deserialize;

use crate::error::CliError;

fn case_map(cases: &[CaseRecord]) -> HashMap<&str, &CaseRecord> {
    cases.iter().map(|c| (c.id.as_str(), c)).collect()
}

/// Scores one group exactly as the service does.
pub fn score_one_group(
    case: &CaseRecord,
    completions: &[String],
    cfg: &EngineConfig,
    scorer: &Scorer,
) -> Result<Vec<RewardRecord>, CliError> {
    if completions.len() != cfg.group_size {
        return Err(CliError::input(format!(
            "case {:?} has {} completions, expected a group of {}",
            case.id,
            completions.len(),
            cfg.group_size
        )));
    }
    Ok(score_group(case, completions, cfg, scorer)?)
}

/// One RewardRecord per completion, rollouts in input order.
pub fn score(cases_text: &str, rollouts_text: &str, cfg: &EngineConfig, scorer: &Scorer) -> Result<Vec<RewardRecord>, CliError> {
    let cases = parse_cases(cases_text)?;
    let by_id = case_map(&cases);
    let mut out = Vec::new();
    for (i, line) in rollouts_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: CliError| match e {
            CliError::Input(m) => CliError::Input(format!("line {}: {m}", i + 1)),
            other => other,
        };
        let rollout: Rollout = parse_line(line).map_err(|e| at(e.into()))?;
        let case = by_id
            .get(rollout.case_id.as_str())
            .ok_or_else(|| at(CliError::input(format!("unknown case {:?}", rollout.case_id))))?;
        out.extend(score_one_group(case, &rollout.completions, cfg, scorer).map_err(at)?);
    }
    Ok(out)
}

pub fn to_jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

pub fn evaluate(cases_text: &str, rollouts_text: &str, cfg: &EngineConfig, scorer: &Scorer) -> Result<MetricsReport, CliError> {
    let cases = parse_cases(cases_text)?;
    let rollouts: Vec<Rollout> = parse_jsonl(rollouts_text)?;
    Ok(evaluate_corpus(&cases, &rollouts, cfg, scorer)?)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SampleLine {
    Parsed(ParsedOutput),
    Raw(String),
}

/// Lines are either parsed outputs or raw completion strings.
pub fn parse_samples(text: &str, cfg: &EngineConfig) -> Result<Vec<ParsedOutput>, CliError> {
    let lines: Vec<SampleLine> = parse_jsonl(text)?;
    let opts = cfg.parse_options();
    lines
        .into_iter()
        .map(|l| match l {
            SampleLine::Parsed(p) if p.domain == Domain::Medical => Ok(p),
            SampleLine::Parsed(_) => Err(CliError::input("self-consistency aggregation expects medical outputs")),
            SampleLine::Raw(raw) => Ok(parse(Domain::Medical, &raw, &opts)),
        })
        .collect()
}

pub fn aggregate_sc(samples_text: &str, cfg: &EngineConfig, scorer: &Scorer) -> Result<ScResult, CliError> {
    let samples = parse_samples(samples_text, cfg)?;
    let sc = ScConfig {
        output_size: cfg.expected_diagnoses,
        ..ScConfig::default()
    };
    Ok(aggregate(&samples, scorer, &sc)?)
}

pub fn index(corpus_text: &str, size: usize, overlap: usize, scorer: &Scorer) -> Result<VectorIndex, CliError> {
    let docs = parse_corpus(corpus_text)?;
    Ok(index_corpus(&docs, size, overlap, scorer)?)
}

pub fn run_query(index_text: &str, text: &str, k: usize, scorer: &Scorer) -> Result<Vec<Hit>, CliError> {
    let idx = VectorIndex::from_json(index_text)?;
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()).into());
    }
    Ok(query(&idx, text, k, scorer)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evidence_reward::MockBackend;
    use std::sync::Arc;

    fn scorer() -> Scorer {
        Scorer::new(Arc::new(MockBackend::new(0)))
    }

    const CASE: &str = r#"{"id":"c1","domain":"legal","anchor":"A contract needs offer and acceptance.","references":["B"]}"#;

    #[test]
    fn empty_rollouts_give_empty_output() {
        let cfg = EngineConfig::default();
        assert!(score(CASE, "", &cfg, &scorer()).unwrap().is_empty());
    }

    #[test]
    fn malformed_rollout_line_is_named() {
        let cfg = EngineConfig { group_size: 2, ..EngineConfig::default() };
        let good = r#"{"case_id":"c1","completions":["{\"answer\":\"B\",\"reasoning\":\"x\"}","{}"]}"#;
        let text = format!("{good}\n{good}\n{{oops\n");
        let e = score(CASE, &text, &cfg, &scorer()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn group_size_is_enforced() {
        let cfg = EngineConfig::default();
        let text = r#"{"case_id":"c1","completions":["a","b"]}"#;
        let e = score(CASE, text, &cfg, &scorer()).unwrap_err();
        assert!(e.to_string().contains("expected a group of 8"));
    }

    #[test]
    fn raw_and_parsed_samples() {
        let cfg = EngineConfig::default();
        let text = "\"not json\"\n{\"domain\":\"medical\",\"predictions\":[],\"format_valid\":false,\"raw_length\":0}\n";
        let s = parse_samples(text, &cfg).unwrap();
        assert_eq!(s.len(), 2);
        assert!(!s[0].format_valid);
    }
}
