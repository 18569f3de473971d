//! Workspace directory and its manifest of artifact digests.
//!
//! Every artifact is recorded with the digest of its content and the digests of
//! the artifacts it was computed from. Reading an artifact checks both, so an
//! edited input or an upstream rerun shows up as a stale artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use busnet::digest::{sha256_hex, Digester};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Logical artifact names and their paths relative to the workspace root.
pub const ARTIFACTS: &[(&str, &str)] = &[
    ("stops", "data/stops.csv"),
    ("routes", "data/routes.csv"),
    ("terminals", "data/terminals.csv"),
    ("pings", "data/pings.csv"),
    ("validations", "data/validations.csv"),
    ("holidays", "data/holidays.csv"),
    ("ground_truth", "data/ground_truth.csv"),
    ("planted", "data/planted_communities.csv"),
    ("ingest_report", "ingest_report.json"),
    ("odpairs", "odpairs.csv"),
    ("odm_diagnostics", "odm_diagnostics.csv"),
    ("embarkings", "embarkings.csv"),
    ("odm_summary", "odm_summary.json"),
    ("regression", "regression.json"),
    ("kernel_curve", "kernel_curve.csv"),
    ("graph", "edges.csv"),
    ("supplies", "supplies.csv"),
    ("graph_summary", "graph_summary.json"),
    ("geojson", "graph.geojson"),
    ("partition", "partition.csv"),
    ("community_stats", "community_stats.csv"),
    ("communities", "communities.json"),
    ("flows", "flows.json"),
    ("flow_matrix_weekday", "flow_matrix_weekday.csv"),
    ("flow_matrix_saturday", "flow_matrix_saturday.csv"),
    ("flow_matrix_sunday_holiday", "flow_matrix_sunday_holiday.csv"),
    ("plan", "plan.json"),
    ("trajectory", "trajectory.csv"),
    ("trajectory_json", "trajectory.json"),
    ("report", "report.md"),
];

pub fn artifact_file(name: &str) -> &'static str {
    ARTIFACTS
        .iter()
        .find(|a| a.0 == name)
        .map(|a| a.1)
        .unwrap_or_else(|| panic!("unknown artifact {name}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub produced_by: String,
    pub created_at: DateTime<Utc>,
    /// Digest of each input artifact at the time this one was produced.
    pub inputs: BTreeMap<String, String>,
    /// Digest of the effective configuration, when the step reads one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    /// Digest over every entry except timestamps, so reruns on identical inputs
    /// give the same value.
    pub fn digest(&self) -> String {
        let mut d = Digester::new();
        for (name, e) in &self.artifacts {
            d.update(name.as_bytes())
                .update(e.file.as_bytes())
                .update(e.sha256.as_bytes())
                .update(e.produced_by.as_bytes());
            for (i, s) in &e.inputs {
                d.update(i.as_bytes()).update(s.as_bytes());
            }
            d.update(e.config_sha256.as_deref().unwrap_or("").as_bytes());
        }
        d.finish()
    }
}

pub struct Workspace {
    root: PathBuf,
    pub manifest: Manifest,
    force: bool,
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

impl Workspace {
    pub fn open(root: &Path, force: bool) -> CliResult<Self> {
        fs::create_dir_all(root.join("data"))?;
        let mpath = root.join(MANIFEST_FILE);
        let manifest = if mpath.exists() {
            serde_json::from_slice(&fs::read(&mpath)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", mpath.display())))?
        } else {
            Manifest::default()
        };
        Ok(Workspace {
            root: root.to_path_buf(),
            manifest,
            force,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(artifact_file(name))
    }

    pub fn has(&self, name: &str) -> bool {
        self.manifest.artifacts.contains_key(name)
    }

    /// Path of a recorded artifact whose content and inputs are current.
    /// With `force`, a stale artifact is accepted and its entry adopts the
    /// current content digest.
    pub fn require(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        let Some(entry) = self.manifest.artifacts.get(name) else {
            return Err(CliError::Missing(name.to_string()));
        };
        if !path.exists() {
            return Err(CliError::Missing(format!("{name} ({} was deleted)", entry.file)));
        }
        let current = file_digest(&path)?;
        let mut problems = Vec::new();
        if current != entry.sha256 {
            problems.push(format!("{} changed since it was recorded", entry.file));
        }
        for (dep, digest) in &entry.inputs {
            match self.manifest.artifacts.get(dep) {
                Some(d) if &d.sha256 == digest => {}
                _ => problems.push(format!("{name} was built from an older {dep}")),
            }
        }
        if !problems.is_empty() {
            if !self.force {
                return Err(CliError::Stale(problems.join("; ")));
            }
            eprintln!("warning: using stale {name}: {}", problems.join("; "));
            let e = self.manifest.artifacts.get_mut(name).expect("checked above");
            e.sha256 = current;
        }
        Ok(path)
    }

    /// Like [`require`](Self::require) for an artifact that may be absent.
    pub fn optional(&mut self, name: &str) -> CliResult<Option<PathBuf>> {
        if self.has(name) {
            self.require(name).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Records an artifact just written, with the current digests of `inputs`.
    pub fn record(&mut self, name: &str, step: &str, inputs: &[&str], config: Option<&str>) -> CliResult<()> {
        let sha256 = file_digest(&self.path(name))?;
        let inputs = inputs
            .iter()
            .filter_map(|i| self.manifest.artifacts.get(*i).map(|e| (i.to_string(), e.sha256.clone())))
            .collect();
        self.manifest.artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                file: artifact_file(name).to_string(),
                sha256,
                produced_by: step.to_string(),
                created_at: Utc::now(),
                inputs,
                config_sha256: config.map(|c| sha256_hex(c.as_bytes())),
            },
        );
        Ok(())
    }

    pub fn forget(&mut self, name: &str) {
        self.manifest.artifacts.remove(name);
    }

    pub fn save(&self) -> CliResult<()> {
        let tmp = self.root.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&self.manifest)?)?;
        fs::rename(tmp, self.root.join(MANIFEST_FILE))?;
        Ok(())
    }
}
