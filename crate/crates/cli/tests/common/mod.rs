#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

pub const SMALL_CITY: &str = r#"
stops = 120
communities = 4
routes_per_community = 8
trunk_routes = 4
route_length = 10
trunk_segment_length = 4
users = 150
pings_per_minute = 0.5
service_start_hour = 6.0
service_end_hour = 20.0
holidays = ["2015-03-13"]
"#;

pub const STEPS: &[&[&str]] = &[
    &["odm"],
    &["validate-sample"],
    &["graph"],
    &["communities"],
    &["flows"],
    &["intervene", "-k", "2"],
    &["report"],
];

pub fn busnet(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_busnet"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(ws: &Path, args: &[&str]) -> String {
    let out = busnet(ws, args);
    assert!(
        out.status.success(),
        "busnet {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn synth(ws: &Path, seed: u64) {
    let cfg = ws.join("small.toml");
    fs::write(&cfg, SMALL_CITY).unwrap();
    ok(ws, &["synth", "--seed", &seed.to_string(), "--synth-config", cfg.to_str().unwrap()]);
}

/// Small synthetic city taken through every step.
pub fn full_workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), 3);
    for step in STEPS {
        ok(dir.path(), step);
    }
    dir
}

pub fn manifest(ws: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(ws.join("manifest.json")).unwrap()).unwrap()
}

/// Recorded content digest per artifact.
pub fn recorded_digests(ws: &Path) -> BTreeMap<String, String> {
    manifest(ws)["artifacts"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v["sha256"].as_str().unwrap().to_string()))
        .collect()
}
