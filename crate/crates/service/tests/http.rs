use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rentdiv_service::http::router;
use rentdiv_service::store::{FileStore, MemoryStore};
use serde_json::{json, Value};
use tower::ServiceExt;

const E2: &str = include_str!("../../core/tests/fixtures/e2.json");

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or_else(|_| panic!("{status}: {}", String::from_utf8_lossy(&bytes))) };
    (status, v)
}

fn app() -> Router {
    router(Arc::new(MemoryStore::new()))
}

#[tokio::test]
async fn solve_e2() {
    let economy: Value = serde_json::from_str(E2).unwrap();
    let (status, v) = call(&app(), "POST", "/v1/solve", Some(json!({ "economy": economy, "trace": true }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["allocation"]["rents"], json!({"a": "190/3", "b": "110/3"}));
    assert_eq!(v["certificate"]["holds"], json!(true));
    assert_eq!(v["agents"][0]["above_budget_by"], json!("10/3"));
    assert_eq!(v["trace"]["iterations"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn solve_rent_objective() {
    let economy: Value = serde_json::from_str(E2).unwrap();
    let (status, v) = call(&app(), "POST", "/v1/solve", Some(json!({ "economy": economy, "objective": "maxmin-transformed-rent" }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["objective"], json!("maxmin-transformed-rent"));
    assert!(v.get("trace").is_none());
}

#[tokio::test]
async fn verify_flags_envy() {
    let economy: Value = serde_json::from_str(E2).unwrap();
    let allocation = json!({"assignment": {"1": "a", "2": "b"}, "rents": {"a": "90", "b": "10"}});
    let (status, v) = call(&app(), "POST", "/v1/verify", Some(json!({ "economy": economy, "allocation": allocation }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["envy_free"], json!(false));
    assert_eq!(v["holds"], json!(false));
    assert_eq!(v["envy"]["agent"], json!("1"));
}

#[tokio::test]
async fn errors_have_stable_shape() {
    let app = app();
    let (status, v) = call(&app, "POST", "/v1/solve", Some(json!({"economy": {"agents": [], "rooms": [], "total_rent": "0"}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], json!("invalid_economy"));
    assert!(v["message"].is_string());
    assert!(v.get("detail").is_some());

    let (status, v) = call(&app, "POST", "/v1/solve", Some(json!({"economy": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], json!("invalid_json"));

    let (status, v) = call(&app, "GET", "/v1/sessions/missing/question", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], json!("session_not_found"));
}

async fn run_story(app: &Router) -> Value {
    let (status, v) = call(app, "POST", "/v1/sessions", Some(json!({"agents": ["1", "2"], "rooms": ["a", "b"], "total_rent": "800"}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let id = v["session"]["id"].as_str().unwrap().to_string();
    assert_eq!(v["question"]["prompt"]["kind"], json!("rents"));

    let script = [
        json!({"agent": "1", "answer": {"kind": "rents", "rents": {"a": "500", "b": "300"}}}),
        json!({"agent": "1", "answer": {"kind": "budget", "budget": "400"}}),
        json!({"agent": "1", "answer": {"kind": "rebate-equivalent", "equivalent": "2"}}),
        json!({"agent": "2", "answer": {"kind": "rents", "rents": {"a": "450", "b": "350"}}}),
        json!({"agent": "2", "answer": {"kind": "budget", "budget": "500"}}),
    ];
    for (k, step) in script.iter().enumerate() {
        let (status, q) = call(app, "GET", &format!("/v1/sessions/{id}/question"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(q["agent"], step["agent"]);
        if k == 2 {
            assert_eq!(q["prompt"]["kind"], json!("rebate-equivalent"));
            assert_eq!(q["prompt"]["options"], json!(["1", "3/2", "2", "3"]));
        }
        let (status, v) = call(app, "POST", &format!("/v1/sessions/{id}/answer"), Some(step.clone())).await;
        assert_eq!(status, StatusCode::OK, "{v}");
    }
    let (status, v) = call(app, "GET", &format!("/v1/sessions/{id}/question"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], json!("session_done"));

    let (status, v) = call(app, "POST", &format!("/v1/sessions/{id}/solve"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

#[tokio::test]
async fn elicitation_story() {
    let v = run_story(&app()).await;
    assert_eq!(v["economy"]["agents"][0]["values"], json!({"a": "600", "b": "300"}));
    assert_eq!(v["economy"]["agents"][0]["rho"], json!("1"));
    assert_eq!(v["economy"]["agents"][1]["rho"], json!("0"));
    assert_eq!(v["solution"]["certificate"]["holds"], json!(true));
    for row in v["solution"]["envy"].as_array().unwrap() {
        for x in row.as_array().unwrap() {
            assert!(x.as_str().unwrap() == "0" || x.as_str().unwrap().starts_with('-'));
        }
    }
    // Replaying the same script gives the same economy and outcome.
    let again = run_story(&app()).await;
    assert_eq!(v, again);
}

#[tokio::test]
async fn answers_are_validated() {
    let app = app();
    let (_, v) = call(&app, "POST", "/v1/sessions", Some(json!({"agents": ["1", "2"], "rooms": ["a", "b"], "total_rent": "800"}))).await;
    let id = v["session"]["id"].as_str().unwrap().to_string();
    let uri = format!("/v1/sessions/{id}/answer");
    let (status, v) = call(&app, "POST", &uri, Some(json!({"agent": "1", "answer": {"kind": "rents", "rents": {"a": "500", "b": "200"}}}))).await;
    assert_eq!((status, v["code"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("invalid_answer")));
    let (status, v) = call(&app, "POST", &uri, Some(json!({"agent": "1", "answer": {"kind": "budget", "budget": "5"}}))).await;
    assert_eq!((status, v["code"].clone()), (StatusCode::CONFLICT, json!("wrong_stage")));
    let (status, v) = call(&app, "POST", &format!("/v1/sessions/{id}/solve"), None).await;
    assert_eq!((status, v["code"].clone()), (StatusCode::CONFLICT, json!("session_incomplete")));
}

#[tokio::test]
async fn file_backed_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let first = router(Arc::new(FileStore::open(dir.path()).unwrap()));
    let (_, v) = call(&first, "POST", "/v1/sessions", Some(json!({"agents": ["x"], "rooms": ["r"], "total_rent": "10"}))).await;
    let id = v["session"]["id"].as_str().unwrap().to_string();
    let second = router(Arc::new(FileStore::open(dir.path()).unwrap()));
    let (status, q) = call(&second, "GET", &format!("/v1/sessions/{id}/question"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(q["agent"], json!("x"));
}
