//! One function per subcommand. Each reads its inputs through the manifest,
//! writes its outputs and records them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use busnet::communities::{modularity, read_assignment, table_decimal, write_assignment, write_stats, Partition};
use busnet::flows::{flow_summary, write_matrix, CommunityLookup, FlowReport};
use busnet::ingest::synth::{generate_synthetic_city, read_ground_truth, SynthConfig};
use busnet::ingest::{load_bundle, load_pings, load_routes, load_stops, write_bundle, Bundle, LoadOptions};
use busnet::intervene::{apply_interventions, plan_interventions, write_trajectory, InterventionPlan, MetricsTrajectory};
use busnet::netcore::{giant_component, graph_geojson, read_edges, write_edges, write_supplies, SupplyGraph};
use busnet::odm::{
    embarking_counts, precision_against, read_embarkings, read_odpairs, write_diagnostics, write_embarkings,
    write_odpairs, Outcome, OutcomeCounts,
};
use busnet::pipeline::{
    communities_stage, filter_days, graph_stage, odm_stage, stats_from_counts, stop_coords, PipelineConfig,
};
use busnet::stats::write_curve;
use busnet::{Calendar, DayClass, Id};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::workspace::Workspace;

pub struct Ctx {
    pub ws: Workspace,
    pub cfg: PipelineConfig,
    /// Canonical text of the effective config, for manifest digests.
    pub cfg_text: String,
}

impl Ctx {
    fn record(&mut self, names: &[&str], step: &str, inputs: &[&str]) -> CliResult<()> {
        for n in names {
            self.ws.record(n, step, inputs, Some(&self.cfg_text))?;
        }
        self.ws.save()
    }

    fn load_opts(&self) -> LoadOptions {
        LoadOptions {
            reject_threshold: self.cfg.reject_threshold,
            bbox: None,
        }
    }

    fn calendar(&mut self) -> CliResult<Calendar> {
        match self.ws.optional("holidays")? {
            Some(p) => Calendar::load(&p).map_err(|e| CliError::Data(format!("holidays: {e}"))),
            None => Ok(Calendar::default()),
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&fs::read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn outcome_map(c: &OutcomeCounts) -> Value {
    Outcome::ALL.iter().map(|o| (o.as_str().to_string(), json!(c.get(*o)))).collect()
}

const DATASETS: [&str; 5] = ["stops", "routes", "terminals", "pings", "validations"];

pub fn synth(
    ctx: &mut Ctx,
    seed: u64,
    synth_config: Option<&Path>,
    full_scale: bool,
    users: Option<usize>,
) -> CliResult<()> {
    let mut cfg = match synth_config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            SynthConfig::from_toml(&text).map_err(CliError::Config)?
        }
        None if full_scale => SynthConfig::full_scale(),
        None => SynthConfig::default(),
    };
    if let Some(u) = users {
        cfg.users = u;
    }
    let city = generate_synthetic_city(&cfg, seed)?;
    let holidays = ctx.ws.path("holidays");
    if holidays.exists() {
        fs::remove_file(&holidays)?;
    }
    city.write(&ctx.ws.root().join("data"))?;
    let mut names = DATASETS.to_vec();
    names.extend(["ground_truth", "planted"]);
    if cfg.holidays.is_empty() {
        ctx.ws.forget("holidays");
    } else {
        names.push("holidays");
    }
    for n in &names {
        ctx.ws.record(n, "synth", &[], None)?;
    }
    ctx.ws.save()?;
    println!(
        "synth: {} stops, {} routes, {} pings, {} validations, digest {}",
        city.bundle.stops.len(),
        city.bundle.routes.len(),
        city.bundle.pings.len(),
        city.bundle.validations.len(),
        city.digest()
    );
    Ok(())
}

pub fn ingest(ctx: &mut Ctx, from: &Path) -> CliResult<()> {
    let bundle = load_bundle(from, &ctx.load_opts())?;
    let data = ctx.ws.root().join("data");
    write_bundle(&data, &bundle)?;
    let mut names = DATASETS.to_vec();
    for (name, file) in [
        ("holidays", "holidays.csv"),
        ("ground_truth", "ground_truth.csv"),
        ("planted", "planted_communities.csv"),
    ] {
        let src = from.join(file);
        if src.exists() {
            fs::copy(&src, ctx.ws.path(name))?;
            names.push(name);
        } else {
            ctx.ws.forget(name);
            let _ = fs::remove_file(ctx.ws.path(name));
        }
    }
    let calendar = match from.join("holidays.csv") {
        p if p.exists() => Calendar::load(&p).map_err(|e| CliError::Data(format!("holidays: {e}")))?,
        _ => Calendar::default(),
    };
    let (kept, days) = filter_days(bundle.validations.clone(), &calendar, &ctx.cfg)?;
    let report = json!({
        "rows": {
            "stops": bundle.stops.len(),
            "routes": bundle.routes.len(),
            "terminals": bundle.terminals.len(),
            "pings": bundle.pings.len(),
            "validations": bundle.validations.len(),
        },
        "rejects": bundle.rejects.iter().map(|(k, v)| (k.as_str().to_string(), json!({
            "count": v.len(),
            "first": v.iter().take(10).collect::<Vec<_>>(),
        }))).collect::<serde_json::Map<_, _>>(),
        "kept_validations": kept.len(),
        "days": days,
    });
    write_json(&ctx.ws.path("ingest_report"), &report)?;
    for n in &names {
        ctx.ws.record(n, "ingest", &[], None)?;
    }
    ctx.record(&["ingest_report"], "ingest", &DATASETS)?;
    println!(
        "ingest: {} validations, {} kept after the day filter",
        bundle.validations.len(),
        kept.len()
    );
    Ok(())
}

pub fn odm(ctx: &mut Ctx) -> CliResult<()> {
    for d in DATASETS {
        ctx.ws.require(d)?;
    }
    let calendar = ctx.calendar()?;
    let bundle = load_bundle(&ctx.ws.root().join("data"), &ctx.load_opts())?;
    let (kept, days) = filter_days(bundle.validations.clone(), &calendar, &ctx.cfg)?;
    let out = odm_stage(&bundle, &kept, &calendar, &ctx.cfg);
    write_odpairs(create(&ctx.ws.path("odpairs"))?, &out.pairs)?;
    write_diagnostics(create(&ctx.ws.path("odm_diagnostics"))?, &out.diagnostics)?;
    write_embarkings(
        create(&ctx.ws.path("embarkings"))?,
        &embarking_counts(&out.boardings, &out.pairs),
    )?;
    let precision = match ctx.ws.optional("ground_truth")? {
        Some(p) => {
            let truth = read_ground_truth(&p)?;
            let share = |(m, r): (usize, usize)| json!({"matched": m, "recovered": r, "precision": m as f64 / r.max(1) as f64});
            json!({
                "fully_on_bus": share(precision_against(&out.pairs, &truth, |l| l.fully_on_bus)),
                "all": share(precision_against(&out.pairs, &truth, |_| true)),
            })
        }
        None => Value::Null,
    };
    let summary = json!({
        "validations": bundle.validations.len(),
        "kept_validations": kept.len(),
        "boardings": out.boardings.len(),
        "od_pairs": out.pairs.len(),
        "outcomes": outcome_map(&out.diagnostics.totals),
        "days": days,
        "precision": precision,
    });
    write_json(&ctx.ws.path("odm_summary"), &summary)?;
    let mut inputs = DATASETS.to_vec();
    inputs.extend(["holidays", "ground_truth"]);
    ctx.record(&["odpairs", "odm_diagnostics", "embarkings", "odm_summary"], "odm", &inputs)?;
    println!("odm: {} OD pairs from {} kept validations", out.pairs.len(), kept.len());
    Ok(())
}

pub fn validate_sample(ctx: &mut Ctx, seed: Option<u64>) -> CliResult<()> {
    let path = ctx.ws.require("embarkings")?;
    if let Some(s) = seed {
        ctx.cfg.stats.seed = s;
    }
    let counts = read_embarkings(&path)?;
    let out = stats_from_counts(&counts, &ctx.cfg)?;
    write_json(
        &ctx.ws.path("regression"),
        &json!({"report": out.report, "points": out.points.len()}),
    )?;
    write_curve(create(&ctx.ws.path("kernel_curve"))?, &out.kernel)?;
    ctx.cfg_text = config_text(&ctx.cfg);
    ctx.record(&["regression", "kernel_curve"], "validate-sample", &["embarkings"])?;
    let f = &out.report.fit;
    println!(
        "validate-sample: beta {:.3}, Y {:.3}, r2 {:.3}, bandwidth {:.3}",
        f.beta, f.y, f.r2, out.report.bandwidth
    );
    Ok(())
}

pub fn graph(ctx: &mut Ctx) -> CliResult<()> {
    for d in ["stops", "routes", "pings"] {
        ctx.ws.require(d)?;
    }
    let calendar = ctx.calendar()?;
    let opts = ctx.load_opts();
    let bundle = Bundle {
        stops: load_stops(&ctx.ws.path("stops"), &opts)?.records,
        routes: load_routes(&ctx.ws.path("routes"), &opts)?.records,
        pings: load_pings(&ctx.ws.path("pings"), &opts)?.records,
        ..Default::default()
    };
    let out = graph_stage(&bundle, &calendar, &ctx.cfg)?;
    write_edges(create(&ctx.ws.path("graph"))?, &out.graph)?;
    write_supplies(create(&ctx.ws.path("supplies"))?, &out.supplies)?;
    write_json(
        &ctx.ws.path("graph_summary"),
        &json!({
            "node_count": out.graph.node_count(),
            "edge_count": out.graph.edge_count(),
            "total_weight": out.graph.total_weight(),
            "components": out.components,
            "giant": {"node_count": out.giant.node_count(), "edge_count": out.giant.edge_count()},
            "metrics": out.metrics,
            "supply_day_class": ctx.cfg.supply_day_class,
        }),
    )?;
    let coords = stop_coords(&bundle);
    write_json(&ctx.ws.path("geojson"), &graph_geojson(&out.graph, &coords, |_| Default::default()))?;
    ctx.record(
        &["graph", "supplies", "graph_summary", "geojson"],
        "graph",
        &["stops", "routes", "pings", "holidays"],
    )?;
    let m = &out.metrics;
    println!(
        "graph: {} nodes, {} edges; giant {} nodes; APL {:.3}, avg eccentricity {:.3}, diameter {}",
        out.graph.node_count(),
        out.graph.edge_count(),
        out.giant.node_count(),
        m.avg_path_length,
        m.avg_eccentricity,
        m.diameter
    );
    Ok(())
}

/// Giant component of the recorded graph.
pub fn load_giant(ws: &mut Workspace) -> CliResult<SupplyGraph> {
    let edges = ws.require("graph")?;
    let stops = ws.require("stops")?;
    let ids: Vec<Id> = load_stops(&stops, &LoadOptions::default())?
        .records
        .into_iter()
        .map(|s| s.stop_id)
        .collect();
    let g = read_edges(&edges, ids)?;
    let (giant, _) = giant_component(&g).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(giant)
}

/// Recorded partition, indexed like `giant`.
pub fn load_partition(ws: &mut Workspace, giant: &SupplyGraph) -> CliResult<Partition> {
    let path = ws.require("partition")?;
    let pairs = read_assignment(&path)?;
    if pairs.len() != giant.node_count() {
        return Err(CliError::Data(format!(
            "partition covers {} stops, the graph has {}",
            pairs.len(),
            giant.node_count()
        )));
    }
    let mut assignment = vec![usize::MAX; giant.node_count()];
    for (id, c) in pairs {
        let i = giant
            .index_of(&id)
            .ok_or_else(|| CliError::Data(format!("partition stop {id} is not in the graph")))?;
        assignment[i] = c;
    }
    let community_count = assignment.iter().max().map_or(0, |m| m + 1);
    let q = modularity(giant, &assignment).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(Partition {
        assignment,
        community_count,
        modularity: q,
        levels: 0,
        level_modularity: Vec::new(),
    })
}

pub fn communities(ctx: &mut Ctx, seed: Option<u64>) -> CliResult<()> {
    if let Some(s) = seed {
        ctx.cfg.louvain.seed = s;
        ctx.cfg_text = config_text(&ctx.cfg);
    }
    let giant = load_giant(&mut ctx.ws)?;
    let out = communities_stage(&giant, &ctx.cfg)?;
    write_assignment(create(&ctx.ws.path("partition"))?, &giant, &out.partition)?;
    write_stats(create(&ctx.ws.path("community_stats"))?, &out.stats)?;
    let p = &out.partition;
    write_json(
        &ctx.ws.path("communities"),
        &json!({
            "community_count": p.community_count,
            "modularity": p.modularity,
            "modularity_check": out.modularity_check,
            "levels": p.levels,
            "level_modularity": p.level_modularity,
            "seed": ctx.cfg.louvain.seed,
            "resolution": ctx.cfg.louvain.resolution,
            "centers": out.centers.iter().enumerate().map(|(c, s)| json!({"community": c, "stop_id": s})).collect::<Vec<_>>(),
            "stats": out.stats,
        }),
    )?;
    ctx.record(&["partition", "community_stats", "communities"], "communities", &["graph", "stops"])?;
    println!(
        "communities: {} communities, Q = {:.4} over {} stops",
        p.community_count,
        p.modularity,
        giant.node_count()
    );
    Ok(())
}

pub fn flows(ctx: &mut Ctx) -> CliResult<()> {
    let odpairs = ctx.ws.require("odpairs")?;
    let partition = ctx.ws.require("partition")?;
    let calendar = ctx.calendar()?;
    let pairs = read_odpairs(&odpairs)?;
    let lookup: CommunityLookup = read_assignment(&partition)?.into_iter().collect();
    let count = lookup.values().max().map_or(0, |m| m + 1);
    let report = flow_summary(&pairs, &lookup, count, &calendar, ctx.cfg.flows_top_k);
    write_json(&ctx.ws.path("flows"), &report)?;
    let mut written = vec!["flows".to_string()];
    for class in DayClass::ALL {
        let name = format!("flow_matrix_{class}");
        match report.matrix(class) {
            Some(m) => {
                write_matrix(create(&ctx.ws.path(&name))?, m)?;
                written.push(name);
            }
            None => {
                ctx.ws.forget(&name);
                let _ = fs::remove_file(ctx.ws.path(&name));
            }
        }
    }
    let names: Vec<&str> = written.iter().map(|s| s.as_str()).collect();
    ctx.record(&names, "flows", &["odpairs", "partition", "holidays"])?;
    for s in &report.summaries {
        println!(
            "flows: {}: {} OD pairs, {:.1}% inter, {} unassigned",
            s.day_class, s.total, s.pct_inter, s.unassigned
        );
    }
    Ok(())
}

pub fn intervene(ctx: &mut Ctx, k: Option<usize>) -> CliResult<()> {
    if let Some(k) = k {
        ctx.cfg.intervention.k = k;
        ctx.cfg.validate().map_err(CliError::Config)?;
        ctx.cfg_text = config_text(&ctx.cfg);
    }
    let giant = load_giant(&mut ctx.ws)?;
    let partition = load_partition(&mut ctx.ws, &giant)?;
    let flows: FlowReport = read_json(&ctx.ws.require("flows")?)?;
    let weekday = flows
        .matrix(DayClass::Weekday)
        .ok_or_else(|| CliError::Data("no weekday flows to plan from".into()))?;
    let plan = plan_interventions(
        &giant,
        &partition,
        weekday,
        ctx.cfg.intervention.k,
        ctx.cfg.intervention.express_weight,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let trajectory =
        apply_interventions(&giant, &plan, &ctx.cfg.metrics).map_err(|e| CliError::Data(e.to_string()))?;
    write_json(&ctx.ws.path("plan"), &plan)?;
    write_trajectory(create(&ctx.ws.path("trajectory"))?, &trajectory)?;
    write_json(&ctx.ws.path("trajectory_json"), &trajectory)?;
    ctx.record(
        &["plan", "trajectory", "trajectory_json"],
        "intervene",
        &["graph", "stops", "partition", "flows"],
    )?;
    for p in &trajectory.points {
        let m = &p.metrics;
        println!(
            "intervene: step {}: APL {:.3}, avg eccentricity {:.3}, diameter {}{}",
            p.step,
            m.avg_path_length,
            m.avg_eccentricity,
            m.diameter,
            if p.duplicated { " (link already existed)" } else { "" }
        );
    }
    Ok(())
}

fn render_report(ctx: &mut Ctx) -> CliResult<(String, Vec<&'static str>)> {
    let mut used = vec!["graph_summary", "communities", "flows"];
    let graph: Value = read_json(&ctx.ws.require("graph_summary")?)?;
    let comms: Value = read_json(&ctx.ws.require("communities")?)?;
    let flows: FlowReport = read_json(&ctx.ws.require("flows")?)?;
    let mut out = String::new();
    writeln!(out, "# Bus network report\n").unwrap();
    let mut inputs = ctx.ws.manifest.clone();
    inputs.artifacts.remove("report");
    writeln!(out, "Inputs digest: `{}`\n", inputs.digest()).unwrap();

    if let Some(p) = ctx.ws.optional("odm_summary")? {
        used.push("odm_summary");
        let s: Value = read_json(&p)?;
        writeln!(out, "## Origin-destination pairs\n").unwrap();
        writeln!(
            out,
            "{} validations, {} kept after the day filter, {} OD pairs.\n",
            s["validations"], s["kept_validations"], s["od_pairs"]
        )
        .unwrap();
        writeln!(out, "| outcome | count |\n|---|---:|").unwrap();
        for (k, v) in s["outcomes"].as_object().into_iter().flatten() {
            writeln!(out, "| {k} | {v} |").unwrap();
        }
        if let Some(p) = s["precision"]["fully_on_bus"]["precision"].as_f64() {
            writeln!(out, "\nPrecision against ground truth, fully-on-bus riders: {:.1}%", 100.0 * p).unwrap();
        }
        writeln!(out).unwrap();
    }

    if let Some(p) = ctx.ws.optional("regression")? {
        used.push("regression");
        let s: Value = read_json(&p)?;
        let f = &s["report"]["fit"];
        writeln!(out, "## Sample validation\n").unwrap();
        writeln!(
            out,
            "sampled = Y * total^beta with beta = {:.3} (s.e. {:.3}), Y = {:.3}, r2 = {:.3} over {} stops; kernel bandwidth {:.3}.\n",
            f["beta"].as_f64().unwrap_or(f64::NAN),
            f["beta_stderr"].as_f64().unwrap_or(f64::NAN),
            f["Y"].as_f64().unwrap_or(f64::NAN),
            f["r2"].as_f64().unwrap_or(f64::NAN),
            s["points"],
            s["report"]["bandwidth"].as_f64().unwrap_or(f64::NAN),
        )
        .unwrap();
    }

    let m = &graph["metrics"];
    writeln!(out, "## Supply graph\n").unwrap();
    writeln!(
        out,
        "{} stops, {} edges; giant component {} stops ({} components).\n\nAPL {:.3}, average eccentricity {:.3}, diameter {} ({}).\n",
        graph["node_count"],
        graph["edge_count"],
        graph["giant"]["node_count"],
        graph["components"]["component_count"],
        m["avg_path_length"].as_f64().unwrap_or(f64::NAN),
        m["avg_eccentricity"].as_f64().unwrap_or(f64::NAN),
        m["diameter"],
        if m["exact"].as_bool() == Some(true) { "exact" } else { "sampled" },
    )
    .unwrap();

    writeln!(out, "## Communities\n").unwrap();
    writeln!(
        out,
        "{} communities, modularity {:.4}.\n",
        comms["community_count"],
        comms["modularity"].as_f64().unwrap_or(f64::NAN)
    )
    .unwrap();
    writeln!(
        out,
        "| id | nodes | diameter | normalized | density | avg clustering | avg weighted degree |\n|---:|---:|---:|---:|---:|---:|---:|"
    )
    .unwrap();
    for s in comms["stats"].as_array().into_iter().flatten() {
        let f = |k: &str| table_decimal(s[k].as_f64().unwrap_or(f64::NAN));
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            s["id"],
            s["node_count"],
            s["diameter"],
            f("normalized_diameter"),
            f("density"),
            f("avg_clustering"),
            f("avg_weighted_degree")
        )
        .unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "## Flows\n").unwrap();
    writeln!(out, "| day class | OD pairs | intra % | inter % | unassigned |\n|---|---:|---:|---:|---:|").unwrap();
    for s in &flows.summaries {
        writeln!(
            out,
            "| {} | {} | {:.1} | {:.1} | {} |",
            s.day_class, s.total, s.pct_intra, s.pct_inter, s.unassigned
        )
        .unwrap();
    }
    if let Some(wd) = flows.summary(DayClass::Weekday) {
        writeln!(out, "\nLargest weekday inter-community flows:\n").unwrap();
        for p in &wd.top_inter_pairs {
            writeln!(out, "- {} <-> {}: {} ({:.1}%)", p.a, p.b, p.flow, 100.0 * p.share).unwrap();
        }
    }
    for n in &flows.notes {
        writeln!(out, "\nNote: {n}").unwrap();
    }
    writeln!(out).unwrap();

    if let (Some(pp), Some(tp)) = (ctx.ws.optional("plan")?, ctx.ws.optional("trajectory_json")?) {
        used.extend(["plan", "trajectory_json"]);
        let plan: InterventionPlan = read_json(&pp)?;
        let t: MetricsTrajectory = read_json(&tp)?;
        writeln!(out, "## Interventions\n").unwrap();
        writeln!(out, "Express links of weight {}.\n", plan.express_weight).unwrap();
        writeln!(out, "| step | link | APL | avg ecc | diameter |\n|---:|---|---:|---:|---:|").unwrap();
        for p in &t.points {
            let link = match p.step {
                0 => "baseline".to_string(),
                i => {
                    let s = &plan.steps[i - 1];
                    format!("{} ({}) <-> {} ({})", s.a, s.center_a, s.b, s.center_b)
                }
            };
            writeln!(
                out,
                "| {} | {} | {:.3} | {:.3} | {} |",
                p.step, link, p.metrics.avg_path_length, p.metrics.avg_eccentricity, p.metrics.diameter
            )
            .unwrap();
        }
    }
    Ok((out, used))
}

pub fn report(ctx: &mut Ctx) -> CliResult<()> {
    let (text, used) = render_report(ctx)?;
    fs::write(ctx.ws.path("report"), &text)?;
    ctx.record(&["report"], "report", &used)?;
    print!("{text}");
    Ok(())
}

pub fn config_text(cfg: &PipelineConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

/// Config from `--config`, else `<workspace>/config.toml`, else defaults.
pub fn load_config(workspace: &Path, explicit: Option<&Path>) -> CliResult<PipelineConfig> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => Some(workspace.join("config.toml")).filter(|p| p.exists()),
    };
    match path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            PipelineConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(PipelineConfig::default()),
    }
}

pub fn stop_coordinates(ws: &mut Workspace) -> CliResult<HashMap<Id, busnet::geo::Coord>> {
    let p = ws.require("stops")?;
    Ok(load_stops(&p, &LoadOptions::default())?
        .records
        .iter()
        .map(|s| (s.stop_id.clone(), s.coord()))
        .collect())
}
