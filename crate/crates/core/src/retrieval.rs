//! Fixed-window chunking and exact cosine retrieval.
//!
//! Token boundaries come from the active backend's tokenizer so window
//! sizes are in that model's tokens. The index is a flat list of unit
//! vectors searched exhaustively.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{Scorer, TokenSpan};
use crate::case::parse_jsonl;
use crate::correctness::dot;
use crate::error::{Error, Result};

pub const CHUNK_SIZE: usize = 320;
pub const CHUNK_OVERLAP: usize = 64;
pub const DEFAULT_QUERY_K: usize = 3;
pub const INDEX_FORMAT: &str = "evreward-vector-index";
pub const INDEX_VERSION: u32 = 1;
const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub text: String,
}

/// Parses a `{doc_id, text}` JSONL corpus; ids must be unique.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusDoc>> {
    let docs: Vec<CorpusDoc> = parse_jsonl(text)?;
    let mut seen = HashSet::new();
    for d in &docs {
        if !seen.insert(d.doc_id.as_str()) {
            return Err(Error::invalid(format!("duplicate doc_id {:?}", d.doc_id)));
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_index: usize,
    /// Half-open token range within the document.
    pub token_span: (usize, usize),
    pub text: String,
    #[serde(default)]
    pub embedding: Vec<f64>,
}

/// Token windows `[0, size)`, `[size - overlap, ..)`, ... covering
/// `n_tokens`. The last window may be shorter.
pub fn window_spans(n_tokens: usize, size: usize, overlap: usize) -> Result<Vec<(usize, usize)>> {
    if size <= overlap {
        return Err(Error::invalid(format!(
            "chunk size {size} must exceed overlap {overlap}"
        )));
    }
    let stride = size - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < n_tokens {
        let end = (start + size).min(n_tokens);
        out.push((start, end));
        if end == n_tokens {
            break;
        }
        start += stride;
    }
    Ok(out)
}

/// Cuts `text` into chunks given its token spans (character offsets).
pub fn chunk_with_spans(
    doc_id: &str,
    text: &str,
    spans: &[TokenSpan],
    size: usize,
    overlap: usize,
) -> Result<Vec<Chunk>> {
    let byte_at: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect();
    let n_chars = byte_at.len() - 1;
    if let Some(&(s, e)) = spans.iter().find(|(s, e)| s > e || *e > n_chars) {
        return Err(Error::invalid(format!("token span ({s}, {e}) out of range")));
    }
    window_spans(spans.len(), size, overlap)?
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| {
            let from = byte_at[spans[start].0];
            let to = byte_at[spans[end - 1].1];
            Ok(Chunk {
                doc_id: doc_id.to_string(),
                chunk_index: i,
                token_span: (start, end),
                text: text.get(from..to.max(from)).unwrap_or_default().to_string(),
                embedding: Vec::new(),
            })
        })
        .collect()
}

pub fn chunk_document(doc_id: &str, text: &str, size: usize, overlap: usize, scorer: &Scorer) -> Result<Vec<Chunk>> {
    if size <= overlap {
        return Err(Error::invalid(format!(
            "chunk size {size} must exceed overlap {overlap}"
        )));
    }
    let spans = scorer.token_spans(&[text.to_string()])?.remove(0);
    chunk_with_spans(doc_id, text, &spans, size, overlap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub format: String,
    pub version: u32,
    pub backend: String,
    pub dimension: usize,
    pub metric: String,
    pub chunks: Vec<Chunk>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk: Chunk,
    pub similarity: f64,
}

impl VectorIndex {
    pub fn empty(backend: String) -> Self {
        Self {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            backend,
            dimension: 0,
            metric: "cosine".into(),
            chunks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != INDEX_FORMAT || self.version != INDEX_VERSION {
            return Err(Error::invalid(format!(
                "unsupported index format {:?} version {}",
                self.format, self.version
            )));
        }
        if self.metric != "cosine" {
            return Err(Error::invalid(format!("unsupported metric {:?}", self.metric)));
        }
        for (i, c) in self.chunks.iter().enumerate() {
            if c.embedding.len() != self.dimension {
                return Err(Error::invalid(format!("chunk {i} has dimension {}", c.embedding.len())));
            }
            let norm = dot(&c.embedding, &c.embedding).sqrt();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::invalid(format!("chunk {i} embedding is not unit-norm")));
            }
            if c.token_span.0 > c.token_span.1 {
                return Err(Error::invalid(format!("chunk {i} has an inverted span")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let index: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("index: {e}")))?;
        index.validate()?;
        Ok(index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Exact top-k against a unit query vector; ties keep insertion order.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<Hit>> {
        if self.is_empty() {
            return Err(Error::invalid("cannot query an empty index"));
        }
        if query.len() != self.dimension {
            return Err(Error::invalid(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.dimension
            )));
        }
        let mut scored: Vec<(usize, f64)> = self
            .chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dot(&c.embedding, query).clamp(-1.0, 1.0)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, similarity)| Hit {
                chunk: self.chunks[i].clone(),
                similarity,
            })
            .collect())
    }
}

pub fn build_index(mut chunks: Vec<Chunk>, scorer: &Scorer) -> Result<VectorIndex> {
    let mut index = VectorIndex::empty(scorer.identifier());
    if chunks.is_empty() {
        return Ok(index);
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = scorer.embed_batch(&texts)?;
    index.dimension = vectors[0].len();
    for (c, v) in chunks.iter_mut().zip(vectors) {
        c.embedding = v;
    }
    index.chunks = chunks;
    Ok(index)
}

/// Chunks every document and indexes the result.
pub fn index_corpus(docs: &[CorpusDoc], size: usize, overlap: usize, scorer: &Scorer) -> Result<VectorIndex> {
    let mut chunks = Vec::new();
    for d in docs {
        chunks.extend(chunk_document(&d.doc_id, &d.text, size, overlap, scorer)?);
    }
    build_index(chunks, scorer)
}

/// Embeds `query_text` with the index's backend and returns the top `k`.
pub fn query(index: &VectorIndex, query_text: &str, k: usize, scorer: &Scorer) -> Result<Vec<Hit>> {
    if index.is_empty() {
        return Err(Error::invalid("cannot query an empty index"));
    }
    let backend = scorer.identifier();
    if backend != index.backend {
        return Err(Error::invalid(format!(
            "index was built with backend {:?}, not {backend:?}",
            index.backend
        )));
    }
    let q = scorer.embed_batch(&[query_text.to_string()])?.remove(0);
    index.search(&q, k)
}
