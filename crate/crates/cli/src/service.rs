//! HTTP reward service for trainer integration.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evidence_reward::{CaseRecord, EngineConfig, RewardRecord, Scorer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::score_one_group;
use crate::error::CliError;

pub const SCORE_GROUP_PATH: &str = "/v1/score-group";
pub const HEALTH_PATH: &str = "/healthz";

#[derive(Clone)]
pub struct AppState {
    pub config: Arc<EngineConfig>,
    pub scorer: Arc<Scorer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreGroupRequest {
    pub case: CaseRecord,
    pub completions: Vec<String>,
    #[serde(default)]
    pub overrides: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreGroupResponse {
    pub records: Vec<RewardRecord>,
}

fn error_response(e: &CliError) -> Response {
    let (status, kind) = match e {
        CliError::Input(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        CliError::Backend(_) => (StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable"),
    };
    (status, Json(json!({"error": {"kind": kind, "message": e.to_string()}}))).into_response()
}

/// Scores a request body; shared by the handler and by tests.
pub fn handle_score_group(state: &AppState, body: &[u8]) -> Result<ScoreGroupResponse, CliError> {
    let req: ScoreGroupRequest =
        serde_json::from_slice(body).map_err(|e| CliError::input(format!("request body: {e}")))?;
    let cfg = match &req.overrides {
        Some(o) => {
            if o.get("backend").is_some() {
                return Err(CliError::input("backend settings cannot be overridden per request"));
            }
            state.config.merged(o)?
        }
        None => (*state.config).clone(),
    };
    let records = score_one_group(&req.case, &req.completions, &cfg, &state.scorer)?;
    Ok(ScoreGroupResponse { records })
}

async fn score_group_handler(State(state): State<AppState>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || handle_score_group(&state, &body)).await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => error_response(&e),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": {"kind": "internal", "message": e.to_string()}})),
        )
            .into_response(),
    }
}

async fn health_handler(State(state): State<AppState>) -> Response {
    let scorer = state.scorer.clone();
    let health = tokio::task::spawn_blocking(move || scorer.backend().health()).await;
    match health {
        Ok(Ok(())) => Json(json!({"status": "ok"})).into_response(),
        Ok(Err(e)) => error_response(&CliError::Backend(e.to_string())),
        Err(e) => error_response(&CliError::Backend(e.to_string())),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(SCORE_GROUP_PATH, post(score_group_handler))
        .route(HEALTH_PATH, get(health_handler))
        .with_state(state)
}
