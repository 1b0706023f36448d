//! Task instances, rollout groups and their JSONL encodings.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Open-ended ranked diagnoses.
    Medical,
    /// Single multiple-choice answer letter.
    Legal,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Medical => "medical",
            Domain::Legal => "legal",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "medical" => Ok(Domain::Medical),
            "legal" => Ok(Domain::Legal),
            other => Err(Error::invalid(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// One task instance: the anchor framing, supplementary note sections,
/// retrieved evidence and the reference answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub domain: Domain,
    pub anchor: String,
    #[serde(default)]
    pub sections: Vec<Section>,
    #[serde(default)]
    pub evidence: Vec<String>,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_passage: Option<String>,
}

impl CaseRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::invalid("case id is empty"));
        }
        if self.anchor.trim().is_empty() {
            return Err(Error::invalid(format!("case `{}` has an empty anchor", self.id)));
        }
        if self.references.is_empty() {
            return Err(Error::invalid(format!("case `{}` has no references", self.id)));
        }
        if self.domain == Domain::Legal {
            let gold = &self.references[0];
            if crate::parser::normalize_letter(gold).is_none() {
                return Err(Error::invalid(format!(
                    "case `{}`: legal reference `{gold}` is not one of A-D",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A group of completions sampled for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub case_id: String,
    pub completions: Vec<String>,
}

/// Parses one JSONL line into `T`.
pub fn parse_line<T: DeserializeOwned>(line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::invalid(e.to_string()))
}

/// Parses a JSONL document. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = parse_line(line).map_err(|e| Error::Line {
            line: i + 1,
            message: match e {
                Error::InvalidInput(m) => m,
                other => other.to_string(),
            },
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Parses and validates a case corpus; ids must be unique.
pub fn parse_cases(text: &str) -> Result<Vec<CaseRecord>> {
    let mut seen = HashMap::new();
    let mut line_no = 0;
    let mut cases = Vec::new();
    for line in text.lines() {
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |m: String| Error::Line { line: line_no, message: m };
        let case: CaseRecord = serde_json::from_str(line).map_err(|e| wrap(e.to_string()))?;
        case.validate().map_err(|e| wrap(e.to_string()))?;
        if let Some(prev) = seen.insert(case.id.clone(), line_no) {
            return Err(wrap(format!("duplicate case id `{}` (first seen on line {prev})", case.id)));
        }
        cases.push(case);
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_line_with_defaults() {
        let c: CaseRecord = parse_line(
            r#"{"id":"a","domain":"medical","anchor":"chest pain","references":["MI"]}"#,
        )
        .unwrap();
        assert!(c.sections.is_empty() && c.evidence.is_empty() && c.gold_passage.is_none());
        c.validate().unwrap();
    }

    #[test]
    fn parse_cases_reports_line_numbers() {
        let text = "\n{\"id\":\"a\",\"domain\":\"legal\",\"anchor\":\"q\",\"references\":[\"B\"]}\n{oops}\n";
        match parse_cases(text) {
            Err(Error::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let l = r#"{"id":"a","domain":"legal","anchor":"q","references":["B"]}"#;
        let text = format!("{l}\n{l}\n");
        assert!(matches!(parse_cases(&text), Err(Error::Line { line: 2, .. })));
    }

    #[test]
    fn legal_reference_must_be_letter() {
        let l = r#"{"id":"a","domain":"legal","anchor":"q","references":["E"]}"#;
        assert!(parse_cases(l).is_err());
        let l = r#"{"id":"a","domain":"medical","anchor":"  ","references":["x"]}"#;
        assert!(parse_cases(l).is_err());
    }
}
