use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{NliPair, NliTriple, ScorerBackend, TokenSpan};
use crate::error::{BackendError, Error, Result};

type BatchResult<O> = std::result::Result<Vec<O>, BackendError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientOptions {
    /// Largest number of items sent in one backend request.
    pub max_batch: usize,
    /// Sub-batches allowed in flight at once.
    pub parallelism: usize,
    /// Tokens kept free for encoder special tokens when truncating.
    pub truncation_reserve: usize,
    /// Overrides the backend's advertised sequence limit.
    pub max_sequence_tokens: Option<usize>,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            max_batch: 64,
            parallelism: 1,
            truncation_reserve: 3,
            max_sequence_tokens: None,
        }
    }
}

/// Contract-enforcing client over a [`ScorerBackend`].
///
/// Premises are truncated before NLI calls, NLI triples are validated,
/// embeddings are L2-normalized and dimension-checked, and requests are
/// split into sub-batches whose results are re-assembled in input order,
/// so results never depend on how work was batched.
#[derive(Clone)]
pub struct Scorer {
    backend: Arc<dyn ScorerBackend>,
    opts: ClientOptions,
}

impl std::fmt::Debug for Scorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scorer")
            .field("backend", &self.backend.identifier())
            .field("opts", &self.opts)
            .finish()
    }
}

impl Scorer {
    pub fn new(backend: Arc<dyn ScorerBackend>) -> Self {
        Self {
            backend,
            opts: ClientOptions::default(),
        }
    }

    pub fn with_options(mut self, opts: ClientOptions) -> Self {
        self.opts = ClientOptions {
            max_batch: opts.max_batch.max(1),
            parallelism: opts.parallelism.max(1),
            ..opts
        };
        self
    }

    pub fn options(&self) -> &ClientOptions {
        &self.opts
    }

    pub fn backend(&self) -> &Arc<dyn ScorerBackend> {
        &self.backend
    }

    pub fn identifier(&self) -> String {
        self.backend.identifier()
    }

    pub fn sequence_limit(&self) -> usize {
        self.opts
            .max_sequence_tokens
            .unwrap_or_else(|| self.backend.max_sequence_tokens())
    }

    fn require(&self, capability: &'static str, present: bool) -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(BackendError::Unsupported {
                backend: self.backend.identifier(),
                capability,
            }
            .into())
        }
    }

    /// Runs `call` over `max_batch`-sized chunks of `items`, with up to
    /// `parallelism` chunks in flight. On failure returns the index of the
    /// first item in the failing chunk.
    fn dispatch<I, O, F>(&self, items: &[I], call: F) -> std::result::Result<Vec<O>, (usize, BackendError)>
    where
        I: Sync,
        O: Send,
        F: Fn(&[I]) -> std::result::Result<Vec<O>, BackendError> + Sync,
    {
        let chunks: Vec<&[I]> = items.chunks(self.opts.max_batch).collect();
        let run = |i: usize| -> std::result::Result<Vec<O>, BackendError> {
            let out = call(chunks[i])?;
            if out.len() != chunks[i].len() {
                return Err(BackendError::Protocol {
                    endpoint: self.backend.identifier(),
                    message: format!("expected {} results, got {}", chunks[i].len(), out.len()),
                });
            }
            Ok(out)
        };

        let results: Vec<BatchResult<O>> =
            if self.opts.parallelism <= 1 || chunks.len() <= 1 {
                (0..chunks.len()).map(run).collect()
            } else {
                let next = AtomicUsize::new(0);
                let slots: Mutex<Vec<Option<BatchResult<O>>>> =
                    Mutex::new((0..chunks.len()).map(|_| None).collect());
                std::thread::scope(|s| {
                    for _ in 0..self.opts.parallelism.min(chunks.len()) {
                        s.spawn(|| loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= chunks.len() {
                                break;
                            }
                            let r = run(i);
                            slots.lock().expect("slot lock")[i] = Some(r);
                        });
                    }
                });
                slots
                    .into_inner()
                    .expect("slot lock")
                    .into_iter()
                    .map(|r| r.expect("every chunk ran"))
                    .collect()
            };

        let mut out = Vec::with_capacity(items.len());
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => out.extend(v),
                Err(e) => return Err((i * self.opts.max_batch, e)),
            }
        }
        Ok(out)
    }

    pub fn token_spans(&self, texts: &[String]) -> Result<Vec<Vec<TokenSpan>>> {
        self.require("tokenize", self.backend.capabilities().tokenize)?;
        self.dispatch(texts, |chunk| self.backend.tokenize(chunk))
            .map_err(|(_, e)| e.into())
    }

    pub fn token_count(&self, text: &str) -> Result<usize> {
        Ok(self.token_spans(&[text.to_string()])?[0].len())
    }

    /// Shortens `premise` so that premise, hypothesis and the reserve fit
    /// within the backend's sequence limit. The hypothesis is never cut.
    pub fn truncate_pair(&self, premise: &str, hypothesis: &str) -> Result<String> {
        let spans = self.token_spans(&[premise.to_string(), hypothesis.to_string()])?;
        truncate_premise(
            premise,
            &spans[0],
            hypothesis,
            spans[1].len(),
            self.sequence_limit(),
            self.opts.truncation_reserve,
        )
    }

    fn truncate_all(&self, pairs: &[NliPair]) -> Result<Vec<NliPair>> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut texts: Vec<String> = Vec::new();
        for p in pairs {
            for t in [p.premise.as_str(), p.hypothesis.as_str()] {
                if !index.contains_key(t) {
                    index.insert(t, texts.len());
                    texts.push(t.to_string());
                }
            }
        }
        let spans = self.token_spans(&texts)?;
        let limit = self.sequence_limit();
        pairs
            .iter()
            .map(|p| {
                let premise = truncate_premise(
                    &p.premise,
                    &spans[index[p.premise.as_str()]],
                    &p.hypothesis,
                    spans[index[p.hypothesis.as_str()]].len(),
                    limit,
                    self.opts.truncation_reserve,
                )?;
                Ok(NliPair {
                    premise,
                    hypothesis: p.hypothesis.clone(),
                })
            })
            .collect()
    }

    /// Validated, order-aligned NLI triples for `pairs`, after premise
    /// truncation.
    pub fn nli_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliTriple>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        self.require("nli", self.backend.capabilities().nli)?;
        if let Some(i) = pairs.iter().position(|p| p.hypothesis.trim().is_empty()) {
            return Err(Error::invalid(format!("pair {i} has an empty hypothesis")));
        }
        let truncated = self.truncate_all(pairs)?;
        let triples = self
            .dispatch(&truncated, |chunk| self.backend.nli_batch(chunk))
            .map_err(|(pair, source)| Error::Pair { pair, source })?;
        for (i, t) in triples.iter().enumerate() {
            t.check().map_err(|message| Error::Pair {
                pair: i,
                source: BackendError::Protocol {
                    endpoint: self.backend.identifier(),
                    message,
                },
            })?;
        }
        Ok(triples)
    }

    /// P(entail) - P(contradict) for one pair.
    pub fn nli_delta(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let t = self.nli_batch(&[NliPair::new(premise, hypothesis)])?;
        Ok(t[0].delta())
    }

    /// Unit-norm embeddings of equal dimension, order-aligned with `texts`.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        self.require("embed", self.backend.capabilities().embed)?;
        let raw = self
            .dispatch(texts, |chunk| self.backend.embed_batch(chunk))
            .map_err(|(_, e)| Error::from(e))?;
        let protocol = |message: String| -> Error {
            BackendError::Protocol {
                endpoint: self.backend.identifier(),
                message,
            }
            .into()
        };
        let dim = raw[0].len();
        raw.into_iter()
            .enumerate()
            .map(|(i, mut v)| {
                if v.len() != dim || dim == 0 {
                    return Err(protocol(format!(
                        "embedding {i} has dimension {}, expected {dim}",
                        v.len()
                    )));
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !norm.is_finite() || norm == 0.0 {
                    return Err(protocol(format!("embedding {i} cannot be normalized")));
                }
                v.iter_mut().for_each(|x| *x /= norm);
                Ok(v)
            })
            .collect()
    }

    /// Raw verdict text; interpretation lives in the correctness module.
    pub fn judge(&self, candidate: &str, references: &[String]) -> Result<String> {
        if references.is_empty() {
            return Err(Error::invalid("judge requires at least one reference"));
        }
        self.require("judge", self.backend.capabilities().judge)?;
        Ok(self.backend.judge(candidate, references)?)
    }
}

/// Cuts `premise` after its first `n` tokens where
/// `n = limit - reserve - hypothesis_tokens`. Errors when the hypothesis
/// plus reserve alone exceed `limit`.
pub fn truncate_premise(
    premise: &str,
    premise_spans: &[TokenSpan],
    hypothesis: &str,
    hypothesis_tokens: usize,
    limit: usize,
    reserve: usize,
) -> Result<String> {
    if hypothesis_tokens + reserve > limit {
        return Err(Error::HypothesisTooLong {
            hypothesis: hypothesis.chars().take(80).collect(),
            tokens: hypothesis_tokens,
            limit,
        });
    }
    let budget = limit - reserve - hypothesis_tokens;
    if premise_spans.len() <= budget {
        return Ok(premise.to_string());
    }
    if budget == 0 {
        return Ok(String::new());
    }
    let end_char = premise_spans[budget - 1].1;
    let end_byte = premise
        .char_indices()
        .nth(end_char)
        .map_or(premise.len(), |(b, _)| b);
    Ok(premise[..end_byte].to_string())
}

#[cfg(test)]
mod tests {
    use super::super::mock::whitespace_spans;
    use super::super::MockBackend;
    use super::*;

    fn words(n: usize, prefix: &str) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn scorer() -> Scorer {
        Scorer::new(Arc::new(MockBackend::default()))
    }

    #[test]
    fn truncation_budget_arithmetic() {
        let premise = words(600, "p");
        let hyp = words(50, "h");
        let out = scorer().truncate_pair(&premise, &hyp).unwrap();
        assert_eq!(whitespace_spans(&out).len(), 512 - 50 - 3);
        assert_eq!(out, words(459, "p"));
    }

    #[test]
    fn short_pairs_untouched() {
        assert_eq!(scorer().truncate_pair("a b c", "d").unwrap(), "a b c");
    }

    #[test]
    fn overlong_hypothesis_is_an_error() {
        let err = scorer().truncate_pair("a", &words(512, "h")).unwrap_err();
        assert!(matches!(err, Error::HypothesisTooLong { tokens: 512, .. }));
    }

    #[test]
    fn truncation_respects_multibyte_text() {
        let premise = "été à la plage";
        let spans = whitespace_spans(premise);
        let out = truncate_premise(premise, &spans, "h", 1, 4, 1).unwrap();
        assert_eq!(out, "été à");
    }

    #[test]
    fn batching_does_not_change_results() {
        let pairs: Vec<NliPair> = (0..37)
            .map(|i| NliPair::new(format!("chest pain {i} edema"), format!("edema {}", i % 5)))
            .collect();
        let base = scorer().nli_batch(&pairs).unwrap();
        for (max_batch, parallelism) in [(1, 1), (5, 3), (8, 8), (100, 2)] {
            let s = scorer().with_options(ClientOptions {
                max_batch,
                parallelism,
                ..ClientOptions::default()
            });
            assert_eq!(s.nli_batch(&pairs).unwrap(), base);
        }
        let texts: Vec<String> = pairs.iter().map(|p| p.premise.clone()).collect();
        let e = scorer().embed_batch(&texts).unwrap();
        let e2 = scorer()
            .with_options(ClientOptions {
                max_batch: 2,
                parallelism: 4,
                ..ClientOptions::default()
            })
            .embed_batch(&texts)
            .unwrap();
        assert_eq!(e, e2);
    }

    #[test]
    fn embeddings_are_normalized_by_the_client() {
        let backend = MockBackend::default().with_embedding("x", vec![3.0, 4.0]).with_embedding("y", vec![0.0, 2.0]);
        let s = Scorer::new(Arc::new(backend));
        let v = s.embed_batch(&["x".into(), "y".into()]).unwrap();
        assert_eq!(v[0], vec![0.6, 0.8]);
        assert_eq!(v[1], vec![0.0, 1.0]);
        let one = s.embed_batch(&["x".into()]).unwrap();
        let two = s.embed_batch(&["y".into()]).unwrap();
        assert_eq!(vec![one[0].clone(), two[0].clone()], v);
        let self_cos: f64 = v[0].iter().map(|a| a * a).sum();
        assert!((self_cos - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_protocol_error() {
        let backend = MockBackend::default().with_embedding("x", vec![1.0, 0.0]);
        let s = Scorer::new(Arc::new(backend));
        let err = s.embed_batch(&["x".into(), "y".into()]).unwrap_err();
        assert!(err.is_backend(), "{err}");
    }

    #[test]
    fn bad_triple_is_protocol_error() {
        let backend = MockBackend::default().with_nli("p", "h", NliTriple::new(0.5, 0.2, 0.1));
        let s = Scorer::new(Arc::new(backend));
        assert!(matches!(s.nli_delta("p", "h"), Err(Error::Pair { pair: 0, .. })));
    }

    #[test]
    fn judge_requires_references() {
        assert!(matches!(scorer().judge("x", &[]), Err(Error::InvalidInput(_))));
        assert_eq!(scorer().judge("MI", &["mi".into()]).unwrap(), "TRUE");
    }

    #[test]
    fn empty_nli_batch() {
        assert!(scorer().nli_batch(&[]).unwrap().is_empty());
    }
}
