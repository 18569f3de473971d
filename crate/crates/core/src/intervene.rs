//! Express-route what-ifs: a bidirectional link between the centers of the
//! community pairs with the largest inter flow, added one step at a time while
//! the hop metrics are tracked.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::communities::Partition;
use crate::flows::{top_inter_pairs, FlowMatrix};
use crate::ingest::Id;
use crate::netcore::{betweenness, graph_metrics, GraphMetrics, MetricsConfig, NetError, SupplyGraph};

#[derive(Debug, Error, PartialEq)]
pub enum InterveneError {
    #[error("k = {k} exceeds the {available} community pairs")]
    TooManySteps { k: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroSteps,
    #[error("community {0} does not exist")]
    UnknownCommunity(usize),
    #[error("a step must join two different communities, got {0} twice")]
    SameCommunity(usize),
    #[error("pair {{{0}, {1}}} appears twice in the plan")]
    RepeatedPair(usize, usize),
    #[error("center {0} is not in the graph")]
    UnknownCenter(String),
    #[error(transparent)]
    Graph(#[from] NetError),
}

/// Node of each community with the largest betweenness on the whole graph;
/// ties go to the smallest node id.
pub fn community_centers(g: &SupplyGraph, partition: &Partition, mode: crate::netcore::DistanceMode) -> Vec<usize> {
    let bc = betweenness(g, mode);
    let mut best: Vec<Option<usize>> = vec![None; partition.community_count];
    for (i, &c) in partition.assignment.iter().enumerate() {
        match best[c] {
            Some(b) if bc[i] <= bc[b] => {}
            _ => best[c] = Some(i),
        }
    }
    best.into_iter().map(|b| b.expect("communities are nonempty")).collect()
}

pub fn community_center(g: &SupplyGraph, partition: &Partition, community: usize) -> Result<Id, InterveneError> {
    if community >= partition.community_count {
        return Err(InterveneError::UnknownCommunity(community));
    }
    let centers = community_centers(g, partition, Default::default());
    Ok(g.node_id(centers[community]).clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionStep {
    pub a: usize,
    pub b: usize,
    /// Weekday inter flow between the pair, when planned from flows.
    pub flow: Option<u64>,
    pub center_a: Id,
    pub center_b: Id,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionPlan {
    pub steps: Vec<InterventionStep>,
    pub centers: BTreeMap<usize, Id>,
    pub express_weight: f64,
}

/// Center stop id per community.
pub fn all_centers(g: &SupplyGraph, partition: &Partition) -> BTreeMap<usize, Id> {
    community_centers(g, partition, Default::default())
        .into_iter()
        .enumerate()
        .map(|(c, i)| (c, g.node_id(i).clone()))
        .collect()
}

/// The given weight, else the largest edge weight, else 1.
pub fn default_weight(g: &SupplyGraph, express_weight: Option<f64>) -> f64 {
    express_weight.or(g.max_weight()).unwrap_or(1.0)
}

/// Steps are the top-k weekday inter-community pairs.
pub fn plan_interventions(
    g: &SupplyGraph,
    partition: &Partition,
    weekday: &FlowMatrix,
    k: usize,
    express_weight: Option<f64>,
) -> Result<InterventionPlan, InterveneError> {
    let n = partition.community_count;
    let available = n * n.saturating_sub(1) / 2;
    if k == 0 {
        return Err(InterveneError::ZeroSteps);
    }
    if k > available {
        return Err(InterveneError::TooManySteps { k, available });
    }
    let centers = all_centers(g, partition);
    let steps = top_inter_pairs(weekday, k)
        .into_iter()
        .map(|p| InterventionStep {
            a: p.a,
            b: p.b,
            flow: Some(p.flow),
            center_a: centers[&p.a].clone(),
            center_b: centers[&p.b].clone(),
        })
        .collect();
    Ok(InterventionPlan {
        steps,
        centers,
        express_weight: default_weight(g, express_weight),
    })
}

/// Plan for an explicit list of community pairs, in the given order.
pub fn plan_from_pairs(
    g: &SupplyGraph,
    partition: &Partition,
    pairs: &[(usize, usize)],
    express_weight: Option<f64>,
) -> Result<InterventionPlan, InterveneError> {
    validate_pairs(partition.community_count, pairs)?;
    plan_with_centers(all_centers(g, partition), pairs, default_weight(g, express_weight))
}

/// Same as [`plan_from_pairs`] with centers computed beforehand.
pub fn plan_with_centers(
    centers: BTreeMap<usize, Id>,
    pairs: &[(usize, usize)],
    express_weight: f64,
) -> Result<InterventionPlan, InterveneError> {
    validate_pairs(centers.len(), pairs)?;
    let steps = pairs
        .iter()
        .map(|&(a, b)| InterventionStep {
            a,
            b,
            flow: None,
            center_a: centers[&a].clone(),
            center_b: centers[&b].clone(),
        })
        .collect();
    Ok(InterventionPlan {
        steps,
        centers,
        express_weight,
    })
}

fn validate_pairs(community_count: usize, pairs: &[(usize, usize)]) -> Result<(), InterveneError> {
    let mut seen = std::collections::BTreeSet::new();
    for &(a, b) in pairs {
        for c in [a, b] {
            if c >= community_count {
                return Err(InterveneError::UnknownCommunity(c));
            }
        }
        if a == b {
            return Err(InterveneError::SameCommunity(a));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(InterveneError::RepeatedPair(a.min(b), a.max(b)));
        }
    }
    Ok(())
}

/// Record of one applied step, enough to undo it exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedStep {
    /// (src, dst, weight before the step).
    edges: [(usize, usize, Option<f64>); 2],
}

impl AppliedStep {
    /// True when the express link duplicated an existing edge.
    pub fn duplicated(&self) -> bool {
        self.edges.iter().any(|e| e.2.is_some())
    }
}

pub fn apply_step(g: &mut SupplyGraph, step: &InterventionStep, weight: f64) -> Result<AppliedStep, InterveneError> {
    let u = g
        .index_of(&step.center_a)
        .ok_or_else(|| InterveneError::UnknownCenter(step.center_a.to_string()))?;
    let v = g
        .index_of(&step.center_b)
        .ok_or_else(|| InterveneError::UnknownCenter(step.center_b.to_string()))?;
    let before = [(u, v, g.weight(u, v)), (v, u, g.weight(v, u))];
    g.add_weight_ix(u, v, weight)?;
    g.add_weight_ix(v, u, weight)?;
    Ok(AppliedStep { edges: before })
}

pub fn undo_step(g: &mut SupplyGraph, applied: &AppliedStep) {
    for &(a, b, prev) in applied.edges.iter().rev() {
        match prev {
            Some(w) => {
                g.set_weight_ix(a, b, w).expect("restoring a valid weight");
            }
            None => {
                g.remove_edge_ix(a, b);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub metrics: GraphMetrics,
    pub delta_apl: f64,
    pub delta_ecc: f64,
    pub delta_diameter: i64,
    /// The step's express link already existed as an edge.
    pub duplicated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrajectory {
    /// Step 0 is the baseline.
    pub points: Vec<TrajectoryPoint>,
    /// Whether the first step produced the largest APL drop of all steps.
    pub largest_apl_drop_at_first_step: Option<bool>,
}

/// Adds the plan's links cumulatively, recomputing metrics after each step.
/// `g` is left unchanged.
pub fn apply_interventions(
    g: &SupplyGraph,
    plan: &InterventionPlan,
    cfg: &MetricsConfig,
) -> Result<MetricsTrajectory, InterveneError> {
    let mut work = g.clone();
    let baseline = graph_metrics(&work, cfg)?;
    let mut points = vec![TrajectoryPoint {
        step: 0,
        metrics: baseline,
        delta_apl: 0.0,
        delta_ecc: 0.0,
        delta_diameter: 0,
        duplicated: false,
    }];
    for (i, step) in plan.steps.iter().enumerate() {
        let applied = apply_step(&mut work, step, plan.express_weight)?;
        let m = graph_metrics(&work, cfg)?;
        let prev = &points[i].metrics;
        points.push(TrajectoryPoint {
            step: i + 1,
            delta_apl: m.avg_path_length - prev.avg_path_length,
            delta_ecc: m.avg_eccentricity - prev.avg_eccentricity,
            delta_diameter: m.diameter as i64 - prev.diameter as i64,
            metrics: m,
            duplicated: applied.duplicated(),
        });
    }
    let largest_apl_drop_at_first_step = (points.len() > 2).then(|| {
        let first = points[1].delta_apl;
        points[2..].iter().all(|p| first <= p.delta_apl)
    });
    Ok(MetricsTrajectory {
        points,
        largest_apl_drop_at_first_step,
    })
}

pub fn write_trajectory<W: Write>(w: W, t: &MetricsTrajectory) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["step", "apl", "avg_ecc", "diameter", "delta_apl", "delta_ecc", "delta_diam"])
        .map_err(io::Error::other)?;
    for p in &t.points {
        wr.write_record([
            p.step.to_string(),
            p.metrics.avg_path_length.to_string(),
            p.metrics.avg_eccentricity.to_string(),
            p.metrics.diameter.to_string(),
            p.delta_apl.to_string(),
            p.delta_ecc.to_string(),
            p.delta_diameter.to_string(),
        ])
        .map_err(io::Error::other)?;
    }
    wr.flush()
}
