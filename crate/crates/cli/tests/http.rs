mod common;

use std::path::Path;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use busnet::pipeline::PipelineConfig;
use busnet_cli::server::{router, Snapshot};
use busnet_cli::workspace::Workspace;
use common::*;
use serde_json::{json, Value};
use tower::ServiceExt;

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(name: &str, body: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(body).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn app(ws: &Path) -> (Router, String) {
    let mut w = Workspace::open(ws, false).unwrap();
    let digest = w.manifest.digest();
    (router(Snapshot::load(&mut w, &PipelineConfig::default()).unwrap()), digest)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(app, req).await
}

fn read_json(ws: &Path, file: &str) -> Value {
    serde_json::from_slice(&std::fs::read(ws.join(file)).unwrap()).unwrap()
}

#[tokio::test]
async fn read_endpoints_match_schemas_and_artifacts() {
    let dir = full_workspace();
    let ws = dir.path();
    let (app, digest) = app(ws);

    let (st, body) = get(&app, "/api/graph/summary").await;
    assert_eq!(st, StatusCode::OK);
    assert_valid("graph_summary", &body);
    assert_eq!(body["manifest_digest"], digest);
    assert_eq!(body["summary"], read_json(ws, "graph_summary.json"));

    let (st, body) = get(&app, "/api/graph/geojson").await;
    assert_eq!(st, StatusCode::OK);
    assert_valid("graph_geojson", &body);
    let features = body["geojson"]["features"].as_array().unwrap();
    let giant = body["geojson"]["features"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["properties"]["kind"] == "stop")
        .count();
    assert_eq!(giant as u64, read_json(ws, "graph_summary.json")["giant"]["node_count"].as_u64().unwrap());
    assert!(features.iter().any(|f| f["properties"]["kind"] == "edge"));

    let (st, body) = get(&app, "/api/communities").await;
    assert_eq!(st, StatusCode::OK);
    assert_valid("communities", &body);
    assert_eq!(body["communities"], read_json(ws, "communities.json"));

    for class in ["weekday", "saturday", "sunday_holiday"] {
        let (st, body) = get(&app, &format!("/api/flows?day_class={class}")).await;
        assert_eq!(st, StatusCode::OK, "{class}");
        assert_valid("flows", &body);
        let s = &body["summary"];
        assert_eq!(
            s["intra"].as_u64().unwrap() + s["inter"].as_u64().unwrap() + s["unassigned"].as_u64().unwrap(),
            s["total"].as_u64().unwrap()
        );
    }
    let (st, body) = get(&app, "/api/flows").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["day_class"], "weekday");

    let (st, body) = get(&app, "/api/interventions/plan").await;
    assert_eq!(st, StatusCode::OK);
    assert_valid("plan", &body);
    assert_eq!(body["plan"], read_json(ws, "plan.json"));
}

#[tokio::test]
async fn bad_requests_are_400_with_digest() {
    let dir = full_workspace();
    let (app, digest) = app(dir.path());
    let n = read_json(dir.path(), "communities.json")["community_count"].as_u64().unwrap();

    let (st, body) = get(&app, "/api/flows?day_class=monday").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_valid("error", &body);
    assert_eq!(body["manifest_digest"], digest);

    for bad in [
        json!({"pairs": []}),
        json!({"pairs": [[0, 0]]}),
        json!({"pairs": [[0, n]]}),
        json!({"pairs": [[0, 1], [1, 0]]}),
        json!({"pairs": [[0, 1]], "express_weight": -1.0}),
        json!({"pairs": [[0, 1]], "extra": true}),
        json!({"pairs": "0-1"}),
    ] {
        let (st, body) = post(&app, "/api/interventions/preview", &bad).await;
        assert_eq!(st, StatusCode::BAD_REQUEST, "{bad}");
        assert_valid("error", &body);
    }
}

#[tokio::test]
async fn preview_of_the_plan_reproduces_the_trajectory() {
    let dir = full_workspace();
    let ws = dir.path();
    let (app, digest) = app(ws);
    let plan = read_json(ws, "plan.json");
    let pairs: Vec<Value> = plan["steps"].as_array().unwrap().iter().map(|s| json!([s["a"], s["b"]])).collect();
    let (st, body) = post(&app, "/api/interventions/preview", &json!({"pairs": pairs})).await;
    assert_eq!(st, StatusCode::OK, "{body}");
    assert_valid("preview", &body);
    assert_eq!(body["manifest_digest"], digest);
    assert_eq!(body["trajectory"], read_json(ws, "trajectory.json"));
    assert_eq!(body["plan"]["express_weight"], plan["express_weight"]);
}

#[tokio::test]
async fn previews_leave_the_workspace_untouched() {
    let dir = full_workspace();
    let ws = dir.path();
    let before = recorded_digests(ws);
    let manifest_before = std::fs::read(ws.join("manifest.json")).unwrap();
    let (app, _) = app(ws);
    let n = read_json(ws, "communities.json")["community_count"].as_u64().unwrap();

    let mut requests = Vec::new();
    for a in 0..n.min(4) {
        for b in (a + 1)..n.min(4) {
            requests.push(json!({"pairs": [[a, b]], "express_weight": 1.0 + a as f64}));
        }
    }
    let results = futures_join(&app, &requests).await;
    for (st, body) in &results {
        assert_eq!(*st, StatusCode::OK);
        let points = body["trajectory"]["points"].as_array().unwrap();
        assert_eq!(points.len(), 2);
        assert!(points[1]["metrics"]["avg_path_length"].as_f64() <= points[0]["metrics"]["avg_path_length"].as_f64());
    }
    // Same request twice gives the same answer.
    let again = post(&app, "/api/interventions/preview", &requests[0]).await;
    assert_eq!(again, results[0]);

    assert_eq!(std::fs::read(ws.join("manifest.json")).unwrap(), manifest_before);
    let mut w = Workspace::open(ws, false).unwrap();
    for name in before.keys() {
        w.require(name).unwrap();
    }
    assert_eq!(recorded_digests(ws), before);
}

async fn futures_join(app: &Router, requests: &[Value]) -> Vec<(StatusCode, Value)> {
    let handles: Vec<_> = requests
        .iter()
        .cloned()
        .map(|r| {
            let app = app.clone();
            tokio::spawn(async move { post(&app, "/api/interventions/preview", &r).await })
        })
        .collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn workspace_without_plan_serves_404_for_it() {
    let dir = full_workspace();
    let ws = dir.path();
    let mut w = Workspace::open(ws, false).unwrap();
    w.forget("plan");
    w.save().unwrap();
    let (app, digest) = app(ws);
    let (st, body) = get(&app, "/api/interventions/plan").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_valid("error", &body);
    assert_eq!(body["manifest_digest"], digest);
}

#[test]
fn schemas_reject_malformed_bodies() {
    let summary = schema("graph_summary");
    assert!(!summary.is_valid(&json!({"summary": {}})));
    assert!(!summary.is_valid(&json!({"manifest_digest": "abc", "summary": {}})));
    let preview = schema("preview");
    let digest = "0".repeat(64);
    assert!(!preview.is_valid(&json!({"manifest_digest": digest, "plan": {}, "trajectory": {"points": []}})));
    let error = schema("error");
    assert!(error.is_valid(&json!({"manifest_digest": digest, "error": "x"})));
    assert!(!error.is_valid(&json!({"manifest_digest": digest, "error": ""})));
}
