//! Serves any [`ScorerBackend`] over the backend wire protocol, so the
//! HTTP client can be exercised without the model server.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evidence_reward::backend::wire;
use evidence_reward::backend::ScorerBackend;
use evidence_reward::BackendError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

type Shared = Arc<dyn ScorerBackend>;

fn reply<Req, Resp>(b: Shared, body: &[u8], f: fn(&dyn ScorerBackend, Req) -> Result<Resp, BackendError>) -> Response
where
    Req: DeserializeOwned,
    Resp: Serialize,
{
    let req: Req = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(json!({"error": e.to_string()}))).into_response(),
    };
    match f(b.as_ref(), req) {
        Ok(resp) => Json(resp).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": e.to_string()}))).into_response(),
    }
}

pub fn router(backend: Shared) -> Router {
    Router::new()
        .route(
            wire::NLI_PATH,
            post(|State(b): State<Shared>, body: Bytes| async move { reply(b, &body, wire::serve_nli) }),
        )
        .route(
            wire::EMBED_PATH,
            post(|State(b): State<Shared>, body: Bytes| async move { reply(b, &body, wire::serve_embed) }),
        )
        .route(
            wire::TOKENIZE_PATH,
            post(|State(b): State<Shared>, body: Bytes| async move { reply(b, &body, wire::serve_tokenize) }),
        )
        .route(
            wire::JUDGE_PATH,
            post(|State(b): State<Shared>, body: Bytes| async move { reply(b, &body, wire::serve_judge) }),
        )
        .route(
            wire::MANIFEST_PATH,
            get(|State(b): State<Shared>| async move { Json(wire::manifest(b.as_ref())) }),
        )
        .with_state(backend)
}
