use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use chromaweak::service::{make_schedule, router, AppState, ScheduleConfig, ServiceConfig};
use chromaweak::thresholds::parse_measurements;

fn app(dir: &std::path::Path) -> Router {
    let mut cfg = ServiceConfig::new(dir);
    cfg.seed = 9;
    router(AppState::new(cfg).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

async fn create(app: &Router, observer: &str, seed: Option<u64>) -> Value {
    let (status, body) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"observer_id": observer, "test_color": {"L": 50.0, "u": 10.0, "v": -5.0}, "seed": seed})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body
}

async fn record_all(app: &Router, id: &str) {
    for d in 0..14 {
        for rep in 1..=4 {
            let (status, body) = call(
                app,
                "POST",
                &format!("/sessions/{id}/matches"),
                Some(json!({
                    "direction_index": d,
                    "repetition": rep,
                    "matched_color": {"L": 50.0 + 0.1 * d as f64, "u": 10.0 + 0.01 * rep as f64, "v": -5.0},
                    "timestamp": "2024-01-01T00:00:00.000Z",
                })),
            )
            .await;
            assert_eq!(status, StatusCode::OK, "{body}");
        }
    }
}

#[tokio::test]
async fn full_session_appends_56_rows() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let created = create(&app, "obs1", Some(5)).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["schedule"].as_array().unwrap().len(), 56);

    record_all(&app, &id).await;
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/finalize"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["rows"], 56);

    let text = std::fs::read(dir.path().join("measurements.csv")).unwrap();
    let set = parse_measurements(text.as_slice()).unwrap();
    assert_eq!(set.records.len(), 56);
    assert_eq!(set.centers.len(), 1);
    assert!(set.records.iter().all(|r| r.session_id == id && r.observer_id == "obs1"));

    // a second session appends below the first
    let other = create(&app, "obs2", None).await;
    let id2 = other["session_id"].as_str().unwrap().to_string();
    record_all(&app, &id2).await;
    let (status, _) = call(&app, "POST", &format!("/sessions/{id2}/finalize"), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = std::fs::read(dir.path().join("measurements.csv")).unwrap();
    assert_eq!(parse_measurements(text.as_slice()).unwrap().records.len(), 112);
}

#[tokio::test]
async fn second_finalize_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, "obs", None).await["session_id"].as_str().unwrap().to_string();
    record_all(&app, &id).await;
    let uri = format!("/sessions/{id}/finalize");
    assert_eq!(call(&app, "POST", &uri, None).await.0, StatusCode::OK);
    let (status, body) = call(&app, "POST", &uri, None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("finalized"));

    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/matches"),
        Some(json!({"direction_index": 0, "repetition": 1, "matched_color": {"L": 50.0, "u": 0.0, "v": 0.0}})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn repeated_match_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, "obs", None).await["session_id"].as_str().unwrap().to_string();
    let body = json!({"direction_index": 3, "repetition": 2, "matched_color": {"L": 50.0, "u": 1.0, "v": 0.0}});
    let uri = format!("/sessions/{id}/matches");
    let first = call(&app, "POST", &uri, Some(body.clone())).await.1;
    let again = call(&app, "POST", &uri, Some(body)).await.1;
    assert_eq!(first["recorded"], 1);
    assert_eq!(again["recorded"], 1);
    assert_eq!(again["expected"], 56);
}

#[tokio::test]
async fn bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    assert_eq!(call(&app, "POST", "/sessions/nope/finalize", None).await.0, StatusCode::NOT_FOUND);

    let id = create(&app, "obs", None).await["session_id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/matches");
    for bad in [
        json!({"direction_index": 14, "repetition": 1, "matched_color": {"L": 50.0, "u": 0.0, "v": 0.0}}),
        json!({"direction_index": 0, "repetition": 5, "matched_color": {"L": 50.0, "u": 0.0, "v": 0.0}}),
        json!({"direction_index": 0, "repetition": 0, "matched_color": {"L": 50.0, "u": 0.0, "v": 0.0}}),
    ] {
        assert_eq!(call(&app, "POST", &uri, Some(bad)).await.0, StatusCode::BAD_REQUEST);
    }
    // nothing recorded yet
    assert_eq!(
        call(&app, "POST", &format!("/sessions/{id}/finalize"), None).await.0,
        StatusCode::BAD_REQUEST
    );
    let (status, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"observer_id": " ", "test_color": {"L": 50.0, "u": 0.0, "v": 0.0}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(!dir.path().join("measurements.csv").exists());
}

#[tokio::test]
async fn sessions_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let a = create(&app, "a", Some(1)).await;
    create(&app, "b", None).await;
    let (status, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[0]["session_id"], a["session_id"]);
    assert_eq!(list[0]["seed"], 1);
    assert_eq!(list[0]["finalized"], false);
    assert_eq!(list[1]["observer_id"], "b");
}

#[tokio::test]
async fn seeded_schedule_replays() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let a = create(&app, "x", Some(77)).await;
    let b = create(&app, "y", Some(77)).await;
    assert_eq!(a["schedule"].to_string(), b["schedule"].to_string());
    let direct = serde_json::to_value(make_schedule(77, &ScheduleConfig::default())).unwrap();
    assert!(close(&a["schedule"], &direct));
}

fn close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-12,
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(p, q)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| close(v, w)))
        }
        _ => a == b,
    }
}

#[tokio::test]
async fn concurrent_sessions_all_land() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut ids = Vec::new();
    for k in 0..4 {
        let id = create(&app, &format!("o{k}"), None).await["session_id"].as_str().unwrap().to_string();
        record_all(&app, &id).await;
        ids.push(id);
    }
    let tasks: Vec<_> = ids
        .iter()
        .map(|id| {
            let app = app.clone();
            let uri = format!("/sessions/{id}/finalize");
            tokio::spawn(async move { call(&app, "POST", &uri, None).await.0 })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let text = std::fs::read(dir.path().join("measurements.csv")).unwrap();
    assert_eq!(parse_measurements(text.as_slice()).unwrap().records.len(), 4 * 56);
}
