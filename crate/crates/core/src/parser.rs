//! Completion parsing and the binary format reward.
//!
//! Completions are expected to carry one JSON object, either
//! `{"diagnoses":[{"name":..,"reasoning":..}, ..]}` (medical) or
//! `{"answer":"X","reasoning":..}` (legal). Parsing never fails hard: a
//! completion that cannot be used yields `format_valid = false` plus
//! diagnostics, and whatever predictions could be recovered are kept.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::case::Domain;

/// Number of ranked diagnoses a medical completion must contain.
pub const MEDICAL_DIAGNOSES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    /// Diagnosis name, or the answer letter for discrete tasks.
    pub label: String,
    pub reasoning: String,
    /// 1-based position in the source document.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub domain: Domain,
    pub predictions: Vec<Prediction>,
    pub format_valid: bool,
    /// Length of the raw completion in characters.
    pub raw_length: usize,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseOptions {
    /// Require the completion to start with `{` (after whitespace).
    pub strict: bool,
    pub expected_diagnoses: usize,
    /// Accept medical completions with more than `expected_diagnoses`.
    pub allow_extra_diagnoses: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            strict: false,
            expected_diagnoses: MEDICAL_DIAGNOSES,
            allow_extra_diagnoses: false,
        }
    }
}

impl ParseOptions {
    pub fn strict() -> Self {
        Self {
            strict: true,
            ..Self::default()
        }
    }
}

impl ParsedOutput {
    fn empty(domain: Domain, raw: &str) -> Self {
        Self {
            domain,
            predictions: Vec::new(),
            format_valid: false,
            raw_length: raw.chars().count(),
            diagnostics: Vec::new(),
        }
    }

    /// Re-encodes the predictions in the canonical completion schema.
    pub fn to_canonical_json(&self) -> Value {
        match self.domain {
            Domain::Medical => json!({
                "diagnoses": self
                    .predictions
                    .iter()
                    .map(|p| json!({"name": p.label, "reasoning": p.reasoning}))
                    .collect::<Vec<_>>()
            }),
            Domain::Legal => {
                let (answer, reasoning) = self
                    .predictions
                    .first()
                    .map(|p| (p.label.as_str(), p.reasoning.as_str()))
                    .unwrap_or(("", ""));
                json!({"answer": answer, "reasoning": reasoning})
            }
        }
    }

    pub fn top_k(&self, k: usize) -> &[Prediction] {
        &self.predictions[..k.min(self.predictions.len())]
    }
}

/// Uppercases a single answer letter and checks it is one of A-D.
pub fn normalize_letter(s: &str) -> Option<char> {
    let mut chars = s.trim().chars();
    let c = chars.next()?.to_ascii_uppercase();
    if chars.next().is_some() || !matches!(c, 'A'..='D') {
        return None;
    }
    Some(c)
}

/// `1.0` iff the completion satisfied its domain's format contract.
pub fn format_reward(parsed: &ParsedOutput) -> f64 {
    if parsed.format_valid {
        1.0
    } else {
        0.0
    }
}

pub fn parse(domain: Domain, raw: &str, opts: &ParseOptions) -> ParsedOutput {
    match domain {
        Domain::Medical => parse_medical(raw, opts),
        Domain::Legal => parse_legal(raw, opts),
    }
}

/// Like [`parse`] for arbitrary bytes; invalid UTF-8 is replaced.
pub fn parse_bytes(domain: Domain, raw: &[u8], opts: &ParseOptions) -> ParsedOutput {
    parse(domain, &String::from_utf8_lossy(raw), opts)
}

pub fn parse_medical(raw: &str, opts: &ParseOptions) -> ParsedOutput {
    let mut out = ParsedOutput::empty(Domain::Medical, raw);
    let Some(obj) = locate(raw, &mut out.diagnostics) else {
        return out;
    };
    let mut valid = check_strict(raw, opts, &mut out.diagnostics);

    let items = match obj.get("diagnoses") {
        Some(Value::Array(items)) => items,
        Some(_) => {
            out.diagnostics.push("`diagnoses` is not an array".into());
            return out;
        }
        None => {
            out.diagnostics.push("missing `diagnoses` field".into());
            return out;
        }
    };

    for (i, item) in items.iter().enumerate() {
        let Value::Object(entry) = item else {
            out.diagnostics.push(format!("diagnosis {} is not an object", i + 1));
            valid = false;
            continue;
        };
        let name = string_field(entry, "name");
        let reasoning = string_field(entry, "reasoning");
        let rank = out.predictions.len() + 1;
        if name.trim().is_empty() {
            out.diagnostics.push(format!("diagnosis {rank} has an empty name"));
            valid = false;
        }
        if reasoning.trim().is_empty() {
            out.diagnostics.push(format!("diagnosis {rank} has empty reasoning"));
            valid = false;
        }
        out.predictions.push(Prediction {
            label: name,
            reasoning,
            rank,
        });
    }

    let n = out.predictions.len();
    let want = opts.expected_diagnoses;
    let count_ok = n == want || (opts.allow_extra_diagnoses && n > want);
    if !count_ok {
        out.diagnostics
            .push(format!("expected exactly {want} diagnoses, found {n}"));
        valid = false;
    }
    out.format_valid = valid && n > 0;
    out
}

pub fn parse_legal(raw: &str, opts: &ParseOptions) -> ParsedOutput {
    let mut out = ParsedOutput::empty(Domain::Legal, raw);
    let Some(obj) = locate(raw, &mut out.diagnostics) else {
        return out;
    };
    let mut valid = check_strict(raw, opts, &mut out.diagnostics);

    let answer = match obj.get("answer") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            out.diagnostics.push("`answer` is not a string".into());
            String::new()
        }
        None => {
            out.diagnostics.push("missing `answer` field".into());
            String::new()
        }
    };
    let reasoning = string_field(&obj, "reasoning");
    if reasoning.trim().is_empty() {
        out.diagnostics.push("empty reasoning".into());
        valid = false;
    }
    match normalize_letter(&answer) {
        Some(letter) => out.predictions.push(Prediction {
            label: letter.to_string(),
            reasoning,
            rank: 1,
        }),
        None => {
            out.diagnostics
                .push(format!("answer {answer:?} is not a single letter A-D"));
            valid = false;
        }
    }
    out.format_valid = valid && !out.predictions.is_empty();
    out
}

fn string_field(obj: &Map<String, Value>, key: &str) -> String {
    match obj.get(key) {
        Some(Value::String(s)) => s.clone(),
        _ => String::new(),
    }
}

fn check_strict(raw: &str, opts: &ParseOptions, diagnostics: &mut Vec<String>) -> bool {
    if opts.strict && !raw.trim_start().starts_with('{') {
        diagnostics.push("strict mode: completion does not start with `{`".into());
        return false;
    }
    true
}

fn locate(raw: &str, diagnostics: &mut Vec<String>) -> Option<Map<String, Value>> {
    if raw.trim().is_empty() {
        diagnostics.push("empty completion".into());
        return None;
    }
    match first_json_object(raw) {
        Some((_, obj)) => Some(obj),
        None => {
            diagnostics.push("no balanced JSON object found".into());
            None
        }
    }
}

/// Finds the first brace-balanced `{...}` span that parses as a JSON
/// object. Returns its byte offset and the parsed object.
///
/// Spans that balance but fail to parse are skipped as a whole, so the
/// scan is linear in the input length. An opening brace that never closes
/// ends the search.
pub fn first_json_object(raw: &str) -> Option<(usize, Map<String, Value>)> {
    let bytes = raw.as_bytes();
    let mut pos = 0;
    while let Some(off) = bytes[pos..].iter().position(|&b| b == b'{') {
        let start = pos + off;
        let end = balanced_end(bytes, start)?;
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(&raw[start..=end]) {
            return Some((start, obj));
        }
        pos = end + 1;
    }
    None
}

/// Index of the `}` closing the brace at `start`, ignoring braces inside
/// JSON string literals.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}
