//! End-to-end stages, from loaded datasets to an intervention trajectory.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{Calendar, DayClass};
use crate::communities::{community_stats, louvain, modularity_with_resolution, CommunityError, CommunityStats, Partition};
use crate::flows::{flow_summary, CommunityLookup, FlowReport};
use crate::geo::Coord;
use crate::ingest::{filter_anomalous_days, Bundle, DayFilterReport, Id, IngestError, Validation};
use crate::intervene::{apply_interventions, community_centers, plan_interventions, InterveneError, InterventionPlan, MetricsTrajectory};
use crate::netcore::{
    build_supply_graph, daily_route_supplies, giant_component, graph_metrics, typical_supplies, ComponentReport,
    GraphMetrics, MetricsConfig, NetError, RouteSupply, SupplyGraph,
};
use crate::odm::{build_odm, embarking_counts, OdmConfig, OdmOutput};
use crate::stats::{fit_power_law, kernel_fit, KernelConfig, KernelFit, RegressionReport, StatsError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DayFilterConfig {
    pub low_factor: f64,
    pub high_factor: f64,
}

impl Default for DayFilterConfig {
    fn default() -> Self {
        DayFilterConfig {
            low_factor: 0.5,
            high_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LouvainConfig {
    pub seed: u64,
    pub resolution: f64,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig {
            seed: 42,
            resolution: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionConfig {
    pub k: usize,
    /// Defaults to the largest edge weight of the graph.
    pub express_weight: Option<f64>,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        InterventionConfig {
            k: 5,
            express_weight: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub reject_threshold: f64,
    pub day_filter: DayFilterConfig,
    pub odm: OdmConfig,
    pub stats: KernelConfig,
    /// Route supplies are taken from the median day of this class.
    pub supply_day_class: DayClass,
    pub metrics: MetricsConfig,
    pub louvain: LouvainConfig,
    pub flows_top_k: usize,
    pub intervention: InterventionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            reject_threshold: 0.01,
            day_filter: DayFilterConfig::default(),
            odm: OdmConfig::default(),
            stats: KernelConfig::default(),
            supply_day_class: DayClass::Weekday,
            metrics: MetricsConfig::default(),
            louvain: LouvainConfig::default(),
            flows_top_k: 5,
            intervention: InterventionConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut bad = Vec::new();
        if !(0.0..=1.0).contains(&self.reject_threshold) {
            bad.push("reject_threshold must lie in [0, 1]");
        }
        let f = &self.day_filter;
        if !(f.low_factor > 0.0 && f.low_factor < 1.0 && f.high_factor > 1.0) {
            bad.push("day_filter needs 0 < low_factor < 1 < high_factor");
        }
        if self.odm.max_gap_secs <= 0 {
            bad.push("odm.max_gap_secs must be positive");
        }
        if !(self.odm.snap_radius_m > 0.0) {
            bad.push("odm.snap_radius_m must be positive");
        }
        if !(self.odm.recurrence_share > 0.0 && self.odm.recurrence_share <= 1.0) {
            bad.push("odm.recurrence_share must lie in (0, 1]");
        }
        if self.stats.resamples < crate::stats::MIN_RESAMPLES {
            bad.push("stats.resamples must be at least 100");
        }
        if self.stats.grid_size < 2 {
            bad.push("stats.grid_size must be at least 2");
        }
        if matches!(self.stats.bandwidth, Some(h) if !(h > 0.0)) {
            bad.push("stats.bandwidth must be positive");
        }
        if self.metrics.samples == 0 {
            bad.push("metrics.samples must be positive");
        }
        if !(self.louvain.resolution > 0.0) {
            bad.push("louvain.resolution must be positive");
        }
        if self.intervention.k == 0 {
            bad.push("intervention.k must be at least 1");
        }
        if matches!(self.intervention.express_weight, Some(w) if !(w > 0.0)) {
            bad.push("intervention.express_weight must be positive");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad.join("; "))
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("graph: {0}")]
    Graph(#[from] NetError),
    #[error("communities: {0}")]
    Communities(#[from] CommunityError),
    #[error("interventions: {0}")]
    Intervene(#[from] InterveneError),
    #[error("no weekday OD flows to plan interventions from")]
    NoWeekdayFlows,
}

pub fn filter_days(
    validations: Vec<Validation>,
    calendar: &Calendar,
    cfg: &PipelineConfig,
) -> Result<(Vec<Validation>, Vec<DayFilterReport>), PipelineError> {
    Ok(filter_anomalous_days(
        validations,
        cfg.day_filter.low_factor,
        cfg.day_filter.high_factor,
        calendar,
    )?)
}

pub fn odm_stage(bundle: &Bundle, validations: &[Validation], calendar: &Calendar, cfg: &PipelineConfig) -> OdmOutput {
    build_odm(
        validations,
        &bundle.pings,
        &bundle.routes,
        &bundle.stops,
        &bundle.terminals,
        calendar,
        &cfg.odm,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsOutput {
    pub report: RegressionReport,
    pub kernel: KernelFit,
    /// (total embarkings, sampled embarkings) per stop used in the fits.
    pub points: Vec<(f64, f64)>,
}

pub fn stats_stage(odm: &OdmOutput, cfg: &PipelineConfig) -> Result<StatsOutput, PipelineError> {
    stats_from_counts(&embarking_counts(&odm.boardings, &odm.pairs), cfg)
}

/// Sampled against total embarkings per stop. Stops with no sampled embarking
/// cannot enter a log-log fit and are counted as excluded.
pub fn stats_from_counts(counts: &[(Id, u64, u64)], cfg: &PipelineConfig) -> Result<StatsOutput, PipelineError> {
    let points: Vec<(f64, f64)> = counts
        .iter()
        .filter(|(_, total, sampled)| *total > 0 && *sampled > 0)
        .map(|(_, t, s)| (*t as f64, *s as f64))
        .collect();
    let excluded = counts.len() - points.len();
    let fit = fit_power_law(&points)?;
    let kernel = kernel_fit(&points, &cfg.stats)?;
    Ok(StatsOutput {
        report: RegressionReport {
            fit,
            bandwidth: kernel.bandwidth,
            resamples: cfg.stats.resamples,
            seed: cfg.stats.seed,
            excluded_points: excluded,
        },
        kernel,
        points,
    })
}

#[derive(Clone, Debug)]
pub struct GraphOutput {
    pub supplies: Vec<RouteSupply>,
    pub graph: SupplyGraph,
    pub giant: SupplyGraph,
    pub components: ComponentReport,
    pub metrics: GraphMetrics,
}

pub fn stop_coords(bundle: &Bundle) -> HashMap<Id, Coord> {
    bundle.stops.iter().map(|s| (s.stop_id.clone(), s.coord())).collect()
}

pub fn graph_stage(bundle: &Bundle, calendar: &Calendar, cfg: &PipelineConfig) -> Result<GraphOutput, PipelineError> {
    let coords = stop_coords(bundle);
    let daily = daily_route_supplies(&bundle.routes, &bundle.pings, &coords, cfg.odm.snap_radius_m);
    let supplies = typical_supplies(&daily, calendar, cfg.supply_day_class);
    let supplies = if supplies.is_empty() {
        bundle.routes.iter().map(|r| RouteSupply::empty(r.route_id.clone())).collect()
    } else {
        supplies
    };
    let graph = build_supply_graph(&bundle.routes, &supplies);
    let (giant, components) = giant_component(&graph)?;
    let metrics = graph_metrics(&giant, &cfg.metrics)?;
    Ok(GraphOutput {
        supplies,
        graph,
        giant,
        components,
        metrics,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunitiesOutput {
    pub partition: Partition,
    pub stats: Vec<CommunityStats>,
    /// Center stop per community.
    pub centers: Vec<Id>,
    /// Modularity of the final assignment evaluated from scratch.
    pub modularity_check: f64,
}

pub fn communities_stage(giant: &SupplyGraph, cfg: &PipelineConfig) -> Result<CommunitiesOutput, PipelineError> {
    let partition = louvain(giant, cfg.louvain.seed, cfg.louvain.resolution)?;
    let modularity_check = modularity_with_resolution(giant, &partition.assignment, cfg.louvain.resolution)?;
    let stats = community_stats(giant, &partition, cfg.metrics.mode);
    let centers = community_centers(giant, &partition, cfg.metrics.mode)
        .into_iter()
        .map(|i| giant.node_id(i).clone())
        .collect();
    Ok(CommunitiesOutput {
        partition,
        stats,
        centers,
        modularity_check,
    })
}

pub fn community_lookup(giant: &SupplyGraph, partition: &Partition) -> CommunityLookup {
    giant
        .nodes()
        .iter()
        .cloned()
        .zip(partition.assignment.iter().copied())
        .collect()
}

pub fn flows_stage(
    odm: &OdmOutput,
    giant: &SupplyGraph,
    partition: &Partition,
    calendar: &Calendar,
    cfg: &PipelineConfig,
) -> FlowReport {
    flow_summary(
        &odm.pairs,
        &community_lookup(giant, partition),
        partition.community_count,
        calendar,
        cfg.flows_top_k,
    )
}

pub fn intervene_stage(
    giant: &SupplyGraph,
    partition: &Partition,
    flows: &FlowReport,
    cfg: &PipelineConfig,
) -> Result<(InterventionPlan, MetricsTrajectory), PipelineError> {
    let weekday = flows.matrix(DayClass::Weekday).ok_or(PipelineError::NoWeekdayFlows)?;
    let plan = plan_interventions(giant, partition, weekday, cfg.intervention.k, cfg.intervention.express_weight)?;
    let trajectory = apply_interventions(giant, &plan, &cfg.metrics)?;
    Ok((plan, trajectory))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StageTimings {
    pub stages: Vec<(String, Duration)>,
}

impl StageTimings {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((name.to_string(), start.elapsed()));
        out
    }

    pub fn total(&self) -> Duration {
        self.stages.iter().map(|s| s.1).sum()
    }
}

pub struct PipelineResult {
    pub day_reports: Vec<DayFilterReport>,
    pub kept_validations: usize,
    pub odm: OdmOutput,
    pub stats: Option<StatsOutput>,
    pub graph: GraphOutput,
    pub communities: CommunitiesOutput,
    pub flows: FlowReport,
    pub plan: InterventionPlan,
    pub trajectory: MetricsTrajectory,
    pub timings: StageTimings,
}

/// Every stage in memory. The stats stage is skipped when `with_stats` is false.
pub fn run_pipeline(
    bundle: &Bundle,
    calendar: &Calendar,
    cfg: &PipelineConfig,
    with_stats: bool,
) -> Result<PipelineResult, PipelineError> {
    let mut timings = StageTimings::default();
    let (kept, day_reports) = timings.time("ingest", || filter_days(bundle.validations.clone(), calendar, cfg))?;
    let odm = timings.time("odm", || odm_stage(bundle, &kept, calendar, cfg));
    let stats = if with_stats {
        Some(timings.time("stats", || stats_stage(&odm, cfg))?)
    } else {
        None
    };
    let graph = timings.time("graph", || graph_stage(bundle, calendar, cfg))?;
    let communities = timings.time("communities", || communities_stage(&graph.giant, cfg))?;
    let flows = timings.time("flows", || flows_stage(&odm, &graph.giant, &communities.partition, calendar, cfg));
    let (plan, trajectory) = timings.time("intervene", || intervene_stage(&graph.giant, &communities.partition, &flows, cfg))?;
    Ok(PipelineResult {
        day_reports,
        kept_validations: kept.len(),
        odm,
        stats,
        graph,
        communities,
        flows,
        plan,
        trajectory,
        timings,
    })
}
