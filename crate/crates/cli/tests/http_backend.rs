//! The HTTP client against a server speaking the backend wire protocol.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use common::{read_fixture, start};
use evidence_reward::backend::{wire, HttpBackend, MockBackend, NliPair, RetryPolicy, Scorer, ScorerBackend};
use evidence_reward::case::{parse_cases, parse_jsonl};
use evidence_reward::reward::score_group;
use evidence_reward::{BackendError, EngineConfig, Rollout};
use evreward::mock_server;

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        attempts: 3,
        initial_backoff: Duration::from_millis(5),
    }
}

fn served_mock() -> (HttpBackend, MockBackend) {
    let mock = MockBackend::new(3);
    let addr = start(mock_server::router(Arc::new(mock.clone())));
    let http = HttpBackend::new(&format!("http://{addr}")).with_manifest().unwrap();
    (http, mock)
}

#[test]
fn every_endpoint_agrees_with_in_process_backend() {
    let (http, mock) = served_mock();
    assert_eq!(http.identifier(), mock.identifier());
    assert_eq!(http.max_sequence_tokens(), mock.max_sequence_tokens());

    let pairs: Vec<NliPair> = (0..70)
        .map(|i| NliPair::new(format!("premise {i} chest pain"), format!("pain {}", i % 4)))
        .collect();
    assert_eq!(http.nli_batch(&pairs).unwrap(), mock.nli_batch(&pairs).unwrap());

    let texts: Vec<String> = (0..10).map(|i| format!("text number {i}")).collect();
    let a = http.embed_batch(&texts).unwrap();
    let b = mock.embed_batch(&texts).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x, y);
    }
    assert_eq!(http.tokenize(&texts).unwrap(), mock.tokenize(&texts).unwrap());
    let refs = vec!["Heart failure".to_string()];
    assert_eq!(http.judge("heart failure", &refs).unwrap(), "TRUE");
    assert_eq!(http.judge("stroke", &refs).unwrap(), "FALSE");
    assert!(http.health().is_ok());
}

#[test]
fn group_scores_are_identical_over_http() {
    let (http, mock) = served_mock();
    let cases = parse_cases(&read_fixture("medical_cases.jsonl")).unwrap();
    let rollouts: Vec<Rollout> = parse_jsonl(&read_fixture("medical_rollouts.jsonl")).unwrap();
    let cfg = EngineConfig::default();
    let remote = Scorer::new(Arc::new(http));
    let local = Scorer::new(Arc::new(mock));
    for r in rollouts.iter().take(4) {
        let case = cases.iter().find(|c| c.id == r.case_id).unwrap();
        assert_eq!(
            score_group(case, &r.completions, &cfg, &remote).unwrap(),
            score_group(case, &r.completions, &cfg, &local).unwrap()
        );
    }
}

fn flaky(failures: usize, status: StatusCode) -> (String, Arc<AtomicUsize>) {
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let app = Router::new()
        .route(
            wire::TOKENIZE_PATH,
            post(move |body: axum::body::Bytes| {
                let n = counter.fetch_add(1, Ordering::SeqCst);
                async move {
                    if n < failures {
                        return (status, String::from("{}"));
                    }
                    let req: wire::TextsRequest = serde_json::from_slice(&body).unwrap();
                    let resp = wire::serve_tokenize(&MockBackend::new(0), req).unwrap();
                    (StatusCode::OK, serde_json::to_string(&resp).unwrap())
                }
            }),
        );
    let addr = start(app);
    (format!("http://{addr}"), hits)
}

#[test]
fn transient_failures_are_retried() {
    let (url, hits) = flaky(2, StatusCode::SERVICE_UNAVAILABLE);
    let http = HttpBackend::new(&url).with_retry(fast_retry());
    assert_eq!(http.tokenize(&["a b".into()]).unwrap(), vec![vec![(0, 1), (2, 3)]]);
    assert_eq!(hits.load(Ordering::SeqCst), 3);

    let (url, hits) = flaky(1, StatusCode::TOO_MANY_REQUESTS);
    let http = HttpBackend::new(&url).with_retry(fast_retry());
    assert!(http.tokenize(&["a".into()]).is_ok());
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[test]
fn retries_give_up_after_three_attempts() {
    let (url, hits) = flaky(10, StatusCode::BAD_GATEWAY);
    let http = HttpBackend::new(&url).with_retry(fast_retry());
    match http.tokenize(&["a".into()]).unwrap_err() {
        BackendError::Transport { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits) = flaky(10, StatusCode::BAD_REQUEST);
    let http = HttpBackend::new(&url).with_retry(fast_retry());
    assert!(matches!(http.tokenize(&["a".into()]).unwrap_err(), BackendError::Protocol { .. }));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_responses_are_protocol_errors() {
    let app = Router::new().route(
        wire::EMBED_PATH,
        post(|| async { r#"{"embeddings":[{"id":"7","vector":[1.0]}]}"# }),
    );
    let addr = start(app);
    let http = HttpBackend::new(&format!("http://{addr}")).with_retry(fast_retry());
    assert!(matches!(
        http.embed_batch(&["x".into()]).unwrap_err(),
        BackendError::Protocol { .. }
    ));
}
