mod common;

use std::fs;

use busnet_cli::workspace::{file_digest, Workspace};
use common::*;
use tempfile::TempDir;

fn manifest_digest(ws: &std::path::Path) -> String {
    Workspace::open(ws, false).unwrap().manifest.digest()
}

#[test]
fn full_run_writes_trajectory() {
    let dir = full_workspace();
    let ws = dir.path();
    let csv = fs::read_to_string(ws.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 3, "{csv}");
    let m = manifest(ws);
    for name in [
        "stops", "odpairs", "embarkings", "regression", "graph", "partition", "flows", "plan", "trajectory", "report",
    ] {
        assert!(m["artifacts"].get(name).is_some(), "{name} not recorded");
    }
    assert_eq!(m["artifacts"]["partition"]["produced_by"], "communities");
    assert!(m["artifacts"]["partition"]["inputs"].get("graph").is_some());
    for (name, digest) in recorded_digests(ws) {
        let file = m["artifacts"][&name]["file"].as_str().unwrap();
        assert_eq!(file_digest(&ws.join(file)).unwrap(), digest, "{name}");
    }
    let report = fs::read_to_string(ws.join("report.md")).unwrap();
    for section in ["## Supply graph", "## Communities", "## Flows", "## Interventions", "## Sample validation"] {
        assert!(report.contains(section), "{section}");
    }
}

#[test]
fn reruns_leave_manifest_digest_unchanged() {
    let dir = full_workspace();
    let ws = dir.path();
    let before = manifest_digest(ws);
    synth(ws, 3);
    assert_eq!(manifest_digest(ws), before, "synth");
    for step in STEPS {
        ok(ws, step);
        assert_eq!(manifest_digest(ws), before, "{step:?}");
    }
}

#[test]
fn intervene_before_communities_reports_missing_partition() {
    let dir = TempDir::new().unwrap();
    let ws = dir.path();
    synth(ws, 1);
    ok(ws, &["graph"]);
    let out = busnet(ws, &["intervene", "-k", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing artifact: partition"), "{err}");
}

#[test]
fn step_on_empty_workspace_is_missing() {
    let dir = TempDir::new().unwrap();
    let out = busnet(dir.path(), &["odm"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn changed_stops_are_stale_until_forced() {
    let dir = TempDir::new().unwrap();
    let ws = dir.path();
    synth(ws, 1);
    ok(ws, &["graph"]);
    let stops = ws.join("data/stops.csv");
    let text = fs::read_to_string(&stops).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines.swap(1, 2);
    fs::write(&stops, lines.join("\n") + "\n").unwrap();

    let out = busnet(ws, &["graph"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stale"));

    ok(ws, &["--force", "graph"]);
    assert_eq!(recorded_digests(ws)["stops"], file_digest(&stops).unwrap());
    ok(ws, &["graph"]);
}

#[test]
fn downstream_of_a_rebuilt_input_is_stale() {
    let dir = full_workspace();
    let ws = dir.path();
    let before = recorded_digests(ws)["partition"].clone();
    fs::write(ws.join("config.toml"), "[louvain]\nresolution = 3.0\n").unwrap();
    ok(ws, &["communities"]);
    assert_ne!(recorded_digests(ws)["partition"], before);
    let out = busnet(ws, &["intervene", "-k", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("flows was built from an older partition"), "{err}");
    ok(ws, &["flows"]);
    ok(ws, &["intervene", "-k", "2"]);
}

#[test]
fn invalid_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let ws = dir.path();
    for bad in [
        "reject_threshold = 2.0",
        "[odm]\nmax_gap_secs = -5",
        "[intervention]\nk = 0",
        "no_such_key = 1",
        "[louvain]\nseed = \"abc\"",
    ] {
        fs::write(ws.join("config.toml"), bad).unwrap();
        let out = busnet(ws, &["graph"]);
        assert_eq!(out.status.code(), Some(2), "{bad}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = ws.join("nope.toml");
    let out = busnet(ws, &["--config", missing.to_str().unwrap(), "graph"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_and_sampled_conflict() {
    let dir = TempDir::new().unwrap();
    let out = busnet(dir.path(), &["--exact", "--sampled", "graph"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sampled_flag_switches_metric_mode() {
    let dir = TempDir::new().unwrap();
    let ws = dir.path();
    synth(ws, 2);
    fs::write(ws.join("config.toml"), "[metrics]\nsamples = 20\n").unwrap();
    ok(ws, &["--sampled", "graph"]);
    let s: serde_json::Value = serde_json::from_slice(&fs::read(ws.join("graph_summary.json")).unwrap()).unwrap();
    assert_eq!(s["metrics"]["exact"], false);
    ok(ws, &["--exact", "graph"]);
    let s: serde_json::Value = serde_json::from_slice(&fs::read(ws.join("graph_summary.json")).unwrap()).unwrap();
    assert_eq!(s["metrics"]["exact"], true);
}

#[test]
fn ingest_copies_datasets_and_reports_rows() {
    let src = TempDir::new().unwrap();
    synth(src.path(), 4);
    let dir = TempDir::new().unwrap();
    let ws = dir.path();
    ok(ws, &["ingest", "--from", src.path().join("data").to_str().unwrap()]);
    for f in ["stops.csv", "routes.csv", "terminals.csv", "pings.csv", "validations.csv", "holidays.csv"] {
        assert_eq!(
            fs::read(ws.join("data").join(f)).unwrap(),
            fs::read(src.path().join("data").join(f)).unwrap(),
            "{f}"
        );
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(ws.join("ingest_report.json")).unwrap()).unwrap();
    assert!(report["rows"]["validations"].as_u64().unwrap() > 0);
    ok(ws, &["odm"]);
}

#[test]
fn ingest_of_malformed_data_exits_4() {
    let src = TempDir::new().unwrap();
    synth(src.path(), 4);
    let data = src.path().join("data");
    fs::write(data.join("stops.csv"), "id,name\nS1,x\n").unwrap();
    let dir = TempDir::new().unwrap();
    let out = busnet(dir.path(), &["ingest", "--from", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn too_many_interventions_is_a_config_error() {
    let dir = full_workspace();
    let out = busnet(dir.path(), &["intervene", "-k", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_on_a_busy_port_exits_4() {
    let dir = full_workspace();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = busnet(dir.path(), &["serve", "--bind", &addr]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn serve_needs_a_complete_workspace() {
    let dir = TempDir::new().unwrap();
    let ws = dir.path();
    synth(ws, 1);
    ok(ws, &["graph"]);
    let out = busnet(ws, &["serve", "--bind", "127.0.0.1:0"]);
    assert_eq!(out.status.code(), Some(3));
}
