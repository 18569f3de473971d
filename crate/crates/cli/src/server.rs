//! Read-only HTTP API over a workspace. The snapshot is loaded once; previews
//! work on copies of the graph and never touch the workspace.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use busnet::flows::FlowReport;
use busnet::intervene::{apply_interventions, default_weight, plan_with_centers, InterventionPlan};
use busnet::netcore::{graph_geojson, MetricsConfig, SupplyGraph};
use busnet::pipeline::PipelineConfig;
use busnet::{DayClass, Id};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::commands::{load_giant, load_partition, stop_coordinates};
use crate::error::{CliError, CliResult};
use crate::workspace::Workspace;

pub struct Snapshot {
    pub manifest_digest: String,
    pub giant: SupplyGraph,
    pub metrics: MetricsConfig,
    pub express_weight: f64,
    pub graph_summary: Value,
    pub geojson: Value,
    pub communities: Value,
    pub centers: BTreeMap<usize, Id>,
    pub flows: FlowReport,
    pub plan: Option<InterventionPlan>,
}

fn read_json<T: serde::de::DeserializeOwned>(ws: &mut Workspace, name: &str) -> CliResult<Option<T>> {
    match ws.optional(name)? {
        Some(p) => {
            let v = serde_json::from_slice(&std::fs::read(&p)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(Some(v))
        }
        None => Ok(None),
    }
}

impl Snapshot {
    /// Needs the graph, partition and flows. The plan is served when present.
    pub fn load(ws: &mut Workspace, cfg: &PipelineConfig) -> CliResult<Self> {
        let giant = load_giant(ws)?;
        let partition = load_partition(ws, &giant)?;
        let graph_summary: Value = required(ws, "graph_summary")?;
        let communities: Value = required(ws, "communities")?;
        let flows: FlowReport = required(ws, "flows")?;
        let coords = stop_coordinates(ws)?;
        let centers: BTreeMap<usize, Id> = communities["centers"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|e| Some((e["community"].as_u64()? as usize, Id::from(e["stop_id"].as_str()?))))
            .collect();
        if centers.len() != partition.community_count {
            return Err(CliError::Data(format!(
                "communities.json lists {} centers for {} communities",
                centers.len(),
                partition.community_count
            )));
        }
        let geojson = graph_geojson(&giant, &coords, |i| {
            let mut m = serde_json::Map::new();
            m.insert("community".into(), json!(partition.assignment[i]));
            m
        });
        Ok(Snapshot {
            manifest_digest: ws.manifest.digest(),
            express_weight: default_weight(&giant, cfg.intervention.express_weight),
            metrics: cfg.metrics.clone(),
            giant,
            graph_summary,
            geojson,
            communities,
            centers,
            flows,
            plan: read_json(ws, "plan")?,
        })
    }
}

fn required<T: serde::de::DeserializeOwned>(ws: &mut Workspace, name: &str) -> CliResult<T> {
    read_json(ws, name)?.ok_or_else(|| CliError::Missing(name.to_string()))
}

type Shared = Arc<Snapshot>;

fn ok(s: &Snapshot, key: &str, value: impl serde::Serialize) -> Response {
    Json(json!({"manifest_digest": s.manifest_digest, key: value})).into_response()
}

fn err(s: &Snapshot, status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({"manifest_digest": s.manifest_digest, "error": msg.into()}))).into_response()
}

async fn graph_summary(State(s): State<Shared>) -> Response {
    ok(&s, "summary", &s.graph_summary)
}

async fn graph_geojson_route(State(s): State<Shared>) -> Response {
    ok(&s, "geojson", &s.geojson)
}

async fn communities(State(s): State<Shared>) -> Response {
    Json(json!({
        "manifest_digest": s.manifest_digest,
        "communities": s.communities,
        "geojson": "/api/graph/geojson",
    }))
    .into_response()
}

#[derive(Deserialize)]
struct FlowQuery {
    day_class: Option<String>,
}

async fn flows(State(s): State<Shared>, Query(q): Query<FlowQuery>) -> Response {
    let class = match q.day_class.as_deref().unwrap_or("weekday").parse::<DayClass>() {
        Ok(c) => c,
        Err(e) => return err(&s, StatusCode::BAD_REQUEST, e),
    };
    let report = &s.flows;
    match (report.summary(class), report.matrix(class)) {
        (Some(summary), Some(matrix)) => Json(json!({
            "manifest_digest": s.manifest_digest,
            "day_class": class,
            "unit": report.unit,
            "summary": summary,
            "matrix": matrix.counts,
            "notes": report.notes,
        }))
        .into_response(),
        _ => err(&s, StatusCode::NOT_FOUND, format!("no {class} flows")),
    }
}

async fn plan(State(s): State<Shared>) -> Response {
    match &s.plan {
        Some(p) => ok(&s, "plan", p),
        None => err(&s, StatusCode::NOT_FOUND, "no intervention plan in this workspace"),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewRequest {
    pub pairs: Vec<(usize, usize)>,
    pub express_weight: Option<f64>,
}

async fn preview(State(s): State<Shared>, body: Result<Json<PreviewRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let req = match body {
        Ok(Json(r)) => r,
        Err(e) => return err(&s, StatusCode::BAD_REQUEST, e.body_text()),
    };
    let centers = s.centers.clone();
    if req.pairs.is_empty() {
        return err(&s, StatusCode::BAD_REQUEST, "pairs must not be empty");
    }
    let weight = req.express_weight.unwrap_or(s.express_weight);
    if !(weight.is_finite() && weight > 0.0) {
        return err(&s, StatusCode::BAD_REQUEST, "express_weight must be positive");
    }
    let plan = match plan_with_centers(centers, &req.pairs, weight) {
        Ok(p) => p,
        Err(e) => return err(&s, StatusCode::BAD_REQUEST, e.to_string()),
    };
    let snap = s.clone();
    let result = tokio::task::spawn_blocking(move || {
        apply_interventions(&snap.giant, &plan, &snap.metrics).map(|t| (plan, t))
    })
    .await;
    match result {
        Ok(Ok((plan, trajectory))) => Json(json!({
            "manifest_digest": s.manifest_digest,
            "plan": plan,
            "trajectory": trajectory,
        }))
        .into_response(),
        Ok(Err(e)) => err(&s, StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => err(&s, StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(snapshot: Snapshot) -> Router {
    Router::new()
        .route("/api/graph/summary", get(graph_summary))
        .route("/api/graph/geojson", get(graph_geojson_route))
        .route("/api/communities", get(communities))
        .route("/api/flows", get(flows))
        .route("/api/interventions/plan", get(plan))
        .route("/api/interventions/preview", post(preview))
        .with_state(Arc::new(snapshot))
}
