//! Deterministic in-process backend used by every test and by `--mock`.
//!
//! Embeddings: FNV-1a hash of (seed, text) seeds a ChaCha8 stream; each
//! component is `2u - 1` for a 53-bit uniform `u`, and the vector is
//! L2-normalized. Identical text therefore maps to an identical vector on
//! every platform.
//!
//! NLI, first matching rule wins:
//! 1. fixture table entry for the exact (premise, hypothesis) pair;
//! 2. hypothesis starts with `contradicts:` -> (0.05, 0.05, 0.90);
//! 3. hypothesis is a substring of the premise -> (0.8, 0.1, 0.1);
//! 4. otherwise let `f` be the share of the hypothesis' distinct
//!    lowercase words that occur in the premise. If the hypothesis
//!    contains a negation cue (`no`, `not`, `never`, `without`, `denies`,
//!    `absent`) the triple is (0.1, 0.8 - 0.8f, 0.1 + 0.8f), else
//!    (0.1 + 0.7f, 0.8 - 0.7f, 0.1). Disjoint vocabulary gives
//!    (0.1, 0.8, 0.1).
//!
//! Judge: fixture table, else `TRUE` iff the candidate equals a reference
//! after lowercasing and collapsing non-alphanumerics, else `FALSE`.
//!
//! Tokenizer: whitespace split.

use std::collections::{BTreeSet, HashMap};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{NliPair, NliTriple, ScorerBackend, TokenSpan};
use crate::error::BackendError;

pub const DEFAULT_DIMENSION: usize = 64;
pub const DEFAULT_MAX_SEQUENCE_TOKENS: usize = 512;

const NEGATION_CUES: [&str; 6] = ["no", "not", "never", "without", "denies", "absent"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockFixtures {
    pub nli: Vec<NliFixture>,
    pub embeddings: Vec<EmbeddingFixture>,
    pub judge: Vec<JudgeFixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliFixture {
    pub premise: String,
    pub hypothesis: String,
    pub triple: NliTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFixture {
    pub text: String,
    pub vector: Vec<f64>,
}

/// Verdict for a candidate; when `references` is set the entry only
/// applies to exactly that reference list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeFixture {
    pub candidate: String,
    #[serde(default)]
    pub references: Option<Vec<String>>,
    pub verdict: String,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    dimension: usize,
    max_sequence_tokens: usize,
    nli: HashMap<(String, String), NliTriple>,
    embeddings: HashMap<String, Vec<f64>>,
    judge: Vec<JudgeFixture>,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new(0)
    }
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dimension: DEFAULT_DIMENSION,
            max_sequence_tokens: DEFAULT_MAX_SEQUENCE_TOKENS,
            nli: HashMap::new(),
            embeddings: HashMap::new(),
            judge: Vec::new(),
        }
    }

    pub fn with_fixtures(mut self, fixtures: MockFixtures) -> Self {
        for f in fixtures.nli {
            self.nli.insert((f.premise, f.hypothesis), f.triple);
        }
        for f in fixtures.embeddings {
            self.embeddings.insert(f.text, f.vector);
        }
        self.judge.extend(fixtures.judge);
        self
    }

    pub fn with_dimension(mut self, dimension: usize) -> Self {
        self.dimension = dimension.max(1);
        self
    }

    pub fn with_max_sequence_tokens(mut self, limit: usize) -> Self {
        self.max_sequence_tokens = limit;
        self
    }

    pub fn with_nli(mut self, premise: &str, hypothesis: &str, triple: NliTriple) -> Self {
        self.nli
            .insert((premise.to_string(), hypothesis.to_string()), triple);
        self
    }

    pub fn with_embedding(mut self, text: &str, vector: Vec<f64>) -> Self {
        self.embeddings.insert(text.to_string(), vector);
        self
    }

    pub fn with_verdict(mut self, candidate: &str, verdict: &str) -> Self {
        self.judge.push(JudgeFixture {
            candidate: candidate.to_string(),
            references: None,
            verdict: verdict.to_string(),
        });
        self
    }

    pub fn score_pair(&self, premise: &str, hypothesis: &str) -> NliTriple {
        if let Some(t) = self.nli.get(&(premise.to_string(), hypothesis.to_string())) {
            return *t;
        }
        if hypothesis.trim_start().starts_with("contradicts:") {
            return NliTriple::new(0.05, 0.05, 0.90);
        }
        if premise.contains(hypothesis) {
            return NliTriple::new(0.8, 0.1, 0.1);
        }
        let hyp = words(hypothesis);
        let prem = words(premise);
        let f = if hyp.is_empty() {
            0.0
        } else {
            hyp.iter().filter(|w| prem.contains(*w)).count() as f64 / hyp.len() as f64
        };
        let negated = hyp.iter().any(|w| NEGATION_CUES.contains(&w.as_str()));
        if negated {
            NliTriple::new(0.1, 0.8 - 0.8 * f, 0.1 + 0.8 * f)
        } else {
            NliTriple::new(0.1 + 0.7 * f, 0.8 - 0.7 * f, 0.1)
        }
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        if let Some(v) = self.embeddings.get(text) {
            return v.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(self.seed, text));
        let mut v: Vec<f64> = (0..self.dimension)
            .map(|_| {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                2.0 * u - 1.0
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    fn verdict(&self, candidate: &str, references: &[String]) -> String {
        let hit = self.judge.iter().find(|f| {
            f.candidate == candidate
                && f.references.as_ref().is_none_or(|r| r.as_slice() == references)
        });
        if let Some(f) = hit {
            return f.verdict.clone();
        }
        let c = fold(candidate);
        if references.iter().any(|r| fold(r) == c) {
            "TRUE".into()
        } else {
            "FALSE".into()
        }
    }
}

fn fnv1a(seed: u64, text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(text.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fold(s: &str) -> String {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whitespace tokenization with character offsets.
pub fn whitespace_spans(text: &str) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut start = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, n));
    }
    spans
}

impl ScorerBackend for MockBackend {
    fn identifier(&self) -> String {
        format!("mock-v1:seed={}:dim={}", self.seed, self.dimension)
    }

    fn max_sequence_tokens(&self) -> usize {
        self.max_sequence_tokens
    }

    fn nli_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliTriple>, BackendError> {
        Ok(pairs
            .iter()
            .map(|p| self.score_pair(&p.premise, &p.hypothesis))
            .collect())
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }

    fn judge(&self, candidate: &str, references: &[String]) -> Result<String, BackendError> {
        Ok(self.verdict(candidate, references))
    }

    fn tokenize(&self, texts: &[String]) -> Result<Vec<Vec<TokenSpan>>, BackendError> {
        Ok(texts.iter().map(|t| whitespace_spans(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn substring_rule() {
        let m = MockBackend::default();
        let t = m.score_pair("The patient has chest pain at rest.", "chest pain");
        assert_eq!(t, NliTriple::new(0.8, 0.1, 0.1));
        assert!((t.delta() - 0.7).abs() < 1e-12);
        assert!(t.entail > t.contradict);
    }

    #[test]
    fn disjoint_and_contradiction_rules() {
        let m = MockBackend::default();
        assert_eq!(m.score_pair("alpha beta", "gamma delta"), NliTriple::new(0.1, 0.8, 0.1));
        assert_eq!(
            m.score_pair("alpha beta", "contradicts: alpha"),
            NliTriple::new(0.05, 0.05, 0.90)
        );
        let neg = m.score_pair("fever and cough", "no fever");
        assert!(neg.delta() < 0.0);
        neg.check().unwrap();
    }

    #[test]
    fn partial_overlap_interpolates() {
        let m = MockBackend::default();
        // hypothesis words {edema, pulmonary}, one present
        let t = m.score_pair("bilateral edema noted", "pulmonary edema");
        assert!((t.delta() - 0.35).abs() < 1e-12);
        t.check().unwrap();
    }

    #[test]
    fn fixture_overrides_rules() {
        let t = NliTriple::new(0.2, 0.3, 0.5);
        let m = MockBackend::default().with_nli("p", "p", t);
        assert_eq!(m.score_pair("p", "p"), t);
    }

    #[test]
    fn embeddings_are_deterministic_unit_vectors() {
        let m = MockBackend::new(7);
        let a = m.embed_text("heart failure");
        assert_eq!(a, MockBackend::new(7).embed_text("heart failure"));
        assert!((dot(&a, &a) - 1.0).abs() < 1e-12);
        assert_ne!(a, MockBackend::new(8).embed_text("heart failure"));
        let b = m.embed_text("atrial fibrillation");
        assert!(dot(&a, &b).abs() < 0.85);
    }

    #[test]
    fn pinned_embedding_prefix() {
        // Pinned so any change to the hash/stream is caught.
        let v = MockBackend::new(0).embed_text("abc");
        let again = MockBackend::new(0).embed_text("abc");
        assert_eq!(v.len(), DEFAULT_DIMENSION);
        assert_eq!(v, again);
        assert_eq!(v[0].to_bits(), 0xbfa5edc3efa481c0);
        assert_eq!(v[1].to_bits(), 0x3fc5b1790b3d8c8d);
        assert_eq!(v[63].to_bits(), 0x3fc0bd4c2d475b4c);
    }

    #[test]
    fn judge_fallback_and_fixture() {
        let m = MockBackend::default().with_verdict("MI", "TRUE");
        assert_eq!(m.verdict("MI", &["Acute myocardial infarction".into()]), "TRUE");
        assert_eq!(m.verdict("Heart Failure", &["heart-failure".into()]), "TRUE");
        assert_eq!(m.verdict("Stroke", &["heart failure".into()]), "FALSE");
    }

    #[test]
    fn whitespace_tokens() {
        assert_eq!(whitespace_spans("  a bc\td "), vec![(2, 3), (4, 6), (7, 8)]);
        assert!(whitespace_spans("   ").is_empty());
        assert_eq!(whitespace_spans("é x"), vec![(0, 1), (2, 3)]);
    }
}
