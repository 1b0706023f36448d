//! JSON bodies of the scorer HTTP protocol.
//!
//! | endpoint            | request                                   | response                                   |
//! |---------------------|-------------------------------------------|--------------------------------------------|
//! | `POST /v1/nli`      | `{pairs:[{id,premise,hypothesis}]}`       | `{results:[{id,entail,neutral,contradict}]}` |
//! | `POST /v1/embed`    | `{texts:[{id,text}]}`                     | `{embeddings:[{id,vector}]}`               |
//! | `POST /v1/judge`    | `{id,candidate,references}`               | `{id,verdict}`                             |
//! | `POST /v1/tokenize` | `{texts:[{id,text}]}`                     | `{tokens:[{id,offsets:[[start,end]]}]}`    |
//! | `GET /v1/manifest`  |                                           | `{identifier,capabilities,max_sequence_tokens}` |
//!
//! Responses echo request ids and may list them in any order. Token
//! offsets are Unicode scalar (character) indices.

use serde::{Deserialize, Serialize};

use super::{Capabilities, NliPair, NliTriple, ScorerBackend, TokenSpan};
use crate::error::BackendError;

pub const NLI_PATH: &str = "/v1/nli";
pub const EMBED_PATH: &str = "/v1/embed";
pub const JUDGE_PATH: &str = "/v1/judge";
pub const TOKENIZE_PATH: &str = "/v1/tokenize";
pub const MANIFEST_PATH: &str = "/v1/manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePair {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub pairs: Vec<WirePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTriple {
    pub id: String,
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliResponse {
    pub results: Vec<WireTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireText {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextsRequest {
    pub texts: Vec<WireText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireVector {
    pub id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<WireVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub id: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTokens {
    pub id: String,
    pub offsets: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub tokens: Vec<WireTokens>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub identifier: String,
    pub capabilities: Capabilities,
    pub max_sequence_tokens: usize,
}

fn ids(n: usize) -> impl Iterator<Item = String> {
    (0..n).map(|i| i.to_string())
}

pub fn nli_request(pairs: &[NliPair]) -> NliRequest {
    NliRequest {
        pairs: ids(pairs.len())
            .zip(pairs)
            .map(|(id, p)| WirePair {
                id,
                premise: p.premise.clone(),
                hypothesis: p.hypothesis.clone(),
            })
            .collect(),
    }
}

pub fn texts_request(texts: &[String]) -> TextsRequest {
    TextsRequest {
        texts: ids(texts.len())
            .zip(texts)
            .map(|(id, text)| WireText {
                id,
                text: text.clone(),
            })
            .collect(),
    }
}

/// Puts `items` back in request order using their echoed ids. Every
/// request id `0..n` must appear exactly once.
pub fn reassociate<T>(
    endpoint: &str,
    n: usize,
    items: Vec<(String, T)>,
) -> Result<Vec<T>, BackendError> {
    let protocol = |message: String| BackendError::Protocol {
        endpoint: endpoint.to_string(),
        message,
    };
    if items.len() != n {
        return Err(protocol(format!("expected {n} results, got {}", items.len())));
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (id, item) in items {
        let idx: usize = id
            .parse()
            .ok()
            .filter(|&i| i < n)
            .ok_or_else(|| protocol(format!("unknown id {id:?}")))?;
        if slots[idx].replace(item).is_some() {
            return Err(protocol(format!("duplicate id {id:?}")));
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

fn decode<T: for<'de> Deserialize<'de>>(endpoint: &str, body: &[u8]) -> Result<T, BackendError> {
    serde_json::from_slice(body).map_err(|e| BackendError::Protocol {
        endpoint: endpoint.to_string(),
        message: format!("malformed response: {e}"),
    })
}

pub fn decode_nli_response(n: usize, body: &[u8]) -> Result<Vec<NliTriple>, BackendError> {
    let resp: NliResponse = decode(NLI_PATH, body)?;
    let items = resp
        .results
        .into_iter()
        .map(|r| (r.id, NliTriple::new(r.entail, r.neutral, r.contradict)))
        .collect();
    reassociate(NLI_PATH, n, items)
}

pub fn decode_embed_response(n: usize, body: &[u8]) -> Result<Vec<Vec<f64>>, BackendError> {
    let resp: EmbedResponse = decode(EMBED_PATH, body)?;
    let items = resp.embeddings.into_iter().map(|r| (r.id, r.vector)).collect();
    reassociate(EMBED_PATH, n, items)
}

pub fn decode_tokenize_response(n: usize, body: &[u8]) -> Result<Vec<Vec<TokenSpan>>, BackendError> {
    let resp: TokenizeResponse = decode(TOKENIZE_PATH, body)?;
    let mut items = Vec::with_capacity(resp.tokens.len());
    for t in resp.tokens {
        if t.offsets.iter().any(|[s, e]| s > e) {
            return Err(BackendError::Protocol {
                endpoint: TOKENIZE_PATH.into(),
                message: format!("inverted token span for id {:?}", t.id),
            });
        }
        items.push((t.id, t.offsets.into_iter().map(|[s, e]| (s, e)).collect()));
    }
    reassociate(TOKENIZE_PATH, n, items)
}

pub fn decode_judge_response(id: &str, body: &[u8]) -> Result<String, BackendError> {
    let resp: JudgeResponse = decode(JUDGE_PATH, body)?;
    if resp.id != id {
        return Err(BackendError::Protocol {
            endpoint: JUDGE_PATH.into(),
            message: format!("response id {:?} does not echo request id {id:?}", resp.id),
        });
    }
    Ok(resp.verdict)
}

// Server side: answer protocol requests from any backend.

pub fn serve_nli(b: &dyn ScorerBackend, req: NliRequest) -> Result<NliResponse, BackendError> {
    let pairs: Vec<NliPair> = req
        .pairs
        .iter()
        .map(|p| NliPair::new(p.premise.clone(), p.hypothesis.clone()))
        .collect();
    let triples = b.nli_batch(&pairs)?;
    Ok(NliResponse {
        results: req
            .pairs
            .into_iter()
            .zip(triples)
            .map(|(p, t)| WireTriple {
                id: p.id,
                entail: t.entail,
                neutral: t.neutral,
                contradict: t.contradict,
            })
            .collect(),
    })
}

pub fn serve_embed(b: &dyn ScorerBackend, req: TextsRequest) -> Result<EmbedResponse, BackendError> {
    let texts: Vec<String> = req.texts.iter().map(|t| t.text.clone()).collect();
    let vectors = b.embed_batch(&texts)?;
    Ok(EmbedResponse {
        embeddings: req
            .texts
            .into_iter()
            .zip(vectors)
            .map(|(t, vector)| WireVector { id: t.id, vector })
            .collect(),
    })
}

pub fn serve_tokenize(
    b: &dyn ScorerBackend,
    req: TextsRequest,
) -> Result<TokenizeResponse, BackendError> {
    let texts: Vec<String> = req.texts.iter().map(|t| t.text.clone()).collect();
    let spans = b.tokenize(&texts)?;
    Ok(TokenizeResponse {
        tokens: req
            .texts
            .into_iter()
            .zip(spans)
            .map(|(t, s)| WireTokens {
                id: t.id,
                offsets: s.into_iter().map(|(a, z)| [a, z]).collect(),
            })
            .collect(),
    })
}

pub fn serve_judge(b: &dyn ScorerBackend, req: JudgeRequest) -> Result<JudgeResponse, BackendError> {
    let verdict = b.judge(&req.candidate, &req.references)?;
    Ok(JudgeResponse { id: req.id, verdict })
}

pub fn manifest(b: &dyn ScorerBackend) -> Manifest {
    Manifest {
        identifier: b.identifier(),
        capabilities: b.capabilities(),
        max_sequence_tokens: b.max_sequence_tokens(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reorders_by_id() {
        let body = br#"{"results":[
            {"id":"1","entail":0.1,"neutral":0.8,"contradict":0.1},
            {"id":"0","entail":0.8,"neutral":0.1,"contradict":0.1}]}"#;
        let t = decode_nli_response(2, body).unwrap();
        assert_eq!(t[0].entail, 0.8);
        assert_eq!(t[1].entail, 0.1);
    }

    #[test]
    fn rejects_missing_duplicate_and_unknown_ids() {
        let dup = br#"{"embeddings":[{"id":"0","vector":[1]},{"id":"0","vector":[1]}]}"#;
        assert!(decode_embed_response(2, dup).is_err());
        let unknown = br#"{"embeddings":[{"id":"7","vector":[1]}]}"#;
        assert!(decode_embed_response(1, unknown).is_err());
        let short = br#"{"embeddings":[]}"#;
        assert!(decode_embed_response(1, short).is_err());
        assert!(decode_embed_response(1, b"not json").is_err());
    }

    #[test]
    fn judge_id_must_echo() {
        assert_eq!(decode_judge_response("q", br#"{"id":"q","verdict":"TRUE"}"#).unwrap(), "TRUE");
        assert!(decode_judge_response("q", br#"{"id":"r","verdict":"TRUE"}"#).is_err());
    }

    #[test]
    fn tokenize_rejects_inverted_span() {
        let body = br#"{"tokens":[{"id":"0","offsets":[[3,1]]}]}"#;
        assert!(decode_tokenize_response(1, body).is_err());
    }
}
