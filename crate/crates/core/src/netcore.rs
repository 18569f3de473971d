//! Supply graph and structural metrics.
//!
//! Each route contributes its daily supply w_L = V·C (vehicles times completions
//! per vehicle) to every directed edge between consecutive itinerary stops.
//! Distances are unweighted hops; on digraphs that are not strongly connected,
//! averages run over reachable ordered pairs only.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::calendar::{Calendar, DayClass};
use crate::geo::Coord;
use crate::ingest::{GpsPing, Id, RouteDef};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("graph is empty")]
    EmptyGraph,
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("edge weight must be positive and finite, got {0}")]
    InvalidWeight(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSupply {
    pub route_id: Id,
    /// Distinct vehicles observed.
    pub vehicles: u32,
    /// Completions per vehicle.
    pub completions: f64,
    /// w_L = V·C, total completions.
    pub weight: f64,
}

impl RouteSupply {
    pub fn empty(route_id: Id) -> Self {
        RouteSupply {
            route_id,
            vehicles: 0,
            completions: 0.0,
            weight: 0.0,
        }
    }
}

/// Supply of one route from its pings of one day.
///
/// A completion is counted each time a vehicle comes within `radius_m` of the
/// last itinerary stop after having been within `radius_m` of the first one.
pub fn compute_route_supply(
    route: &RouteDef,
    pings: &[&GpsPing],
    stops: &HashMap<Id, Coord>,
    radius_m: f64,
) -> RouteSupply {
    let (Some(first), Some(last)) = (
        route.itinerary.first().and_then(|s| stops.get(s)),
        route.itinerary.last().and_then(|s| stops.get(s)),
    ) else {
        return RouteSupply::empty(route.route_id.clone());
    };
    let mut by_vehicle: BTreeMap<&str, Vec<&GpsPing>> = BTreeMap::new();
    for p in pings {
        by_vehicle.entry(&p.vehicle_id).or_default().push(p);
    }
    let mut total = 0u64;
    for seq in by_vehicle.values_mut() {
        seq.sort_by_key(|p| p.timestamp);
        let mut armed = false;
        for p in seq.iter() {
            let c = p.coord();
            if armed && c.distance_m(last) <= radius_m {
                total += 1;
                armed = false;
            } else if c.distance_m(first) <= radius_m {
                armed = true;
            }
        }
    }
    let v = by_vehicle.len() as u32;
    let completions = if v == 0 { 0.0 } else { total as f64 / v as f64 };
    RouteSupply {
        route_id: route.route_id.clone(),
        vehicles: v,
        completions,
        weight: if v == 0 { 0.0 } else { total as f64 },
    }
}

/// Route supplies per service day.
pub fn daily_route_supplies(
    routes: &[RouteDef],
    pings: &[GpsPing],
    stops: &HashMap<Id, Coord>,
    radius_m: f64,
) -> BTreeMap<NaiveDate, Vec<RouteSupply>> {
    let mut grouped: HashMap<(&str, NaiveDate), Vec<&GpsPing>> = HashMap::new();
    let mut days: Vec<NaiveDate> = Vec::new();
    for p in pings {
        let d = p.timestamp.local_date();
        grouped.entry((&p.route_id, d)).or_default().push(p);
        days.push(d);
    }
    days.sort_unstable();
    days.dedup();
    days.into_iter()
        .map(|d| {
            let supplies = routes
                .par_iter()
                .map(|r| {
                    let ps = grouped.get(&(&*r.route_id, d)).map(Vec::as_slice).unwrap_or(&[]);
                    compute_route_supply(r, ps, stops, radius_m)
                })
                .collect();
            (d, supplies)
        })
        .collect()
}

/// Per route, the supply of its median day (lower median by weight) among days
/// of `class`. Falls back to all days when none is of that class.
pub fn typical_supplies(
    daily: &BTreeMap<NaiveDate, Vec<RouteSupply>>,
    calendar: &Calendar,
    class: DayClass,
) -> Vec<RouteSupply> {
    let mut chosen: Vec<&Vec<RouteSupply>> = daily
        .iter()
        .filter(|(d, _)| calendar.day_class(**d) == class)
        .map(|(_, s)| s)
        .collect();
    if chosen.is_empty() {
        chosen = daily.values().collect();
    }
    let Some(first) = chosen.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|i| {
            let mut per_day: Vec<&RouteSupply> = chosen.iter().map(|s| &s[i]).collect();
            per_day.sort_by(|a, b| a.weight.total_cmp(&b.weight));
            per_day[(per_day.len() - 1) / 2].clone()
        })
        .collect()
}

/// Directed weighted graph over stops. Node indices follow the sorted stop ids.
#[derive(Clone, Debug, PartialEq)]
pub struct SupplyGraph {
    nodes: Vec<Id>,
    index: HashMap<Id, usize>,
    edges: BTreeMap<(usize, usize), f64>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl SupplyGraph {
    pub fn new(nodes: impl IntoIterator<Item = Id>) -> Self {
        let mut nodes: Vec<Id> = nodes.into_iter().collect();
        nodes.sort();
        nodes.dedup();
        let index = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let n = nodes.len();
        SupplyGraph {
            nodes,
            index,
            edges: BTreeMap::new(),
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
        }
    }

    /// Graph from explicit (src, dst, weight) triples; nodes are the endpoints.
    pub fn from_edges(edges: &[(Id, Id, f64)]) -> Result<Self, NetError> {
        let mut g = SupplyGraph::new(edges.iter().flat_map(|(a, b, _)| [a.clone(), b.clone()]));
        for (a, b, w) in edges {
            g.add_weight(a, b, *w)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Id] {
        &self.nodes
    }

    pub fn node_id(&self, i: usize) -> &Id {
        &self.nodes[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&(u, v)).copied()
    }

    /// Edges as (src index, dst index, weight), ordered by (src, dst).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    pub fn max_weight(&self) -> Option<f64> {
        self.edges.values().copied().reduce(f64::max)
    }

    fn resolve(&self, id: &str) -> Result<usize, NetError> {
        self.index_of(id).ok_or_else(|| NetError::UnknownNode(id.to_string()))
    }

    /// Adds `w` to edge u→v, creating it if absent.
    pub fn add_weight(&mut self, u: &str, v: &str, w: f64) -> Result<(), NetError> {
        let (a, b) = (self.resolve(u)?, self.resolve(v)?);
        self.add_weight_ix(a, b, w)
    }

    pub fn add_weight_ix(&mut self, a: usize, b: usize, w: f64) -> Result<(), NetError> {
        if a == b {
            return Err(NetError::SelfLoop(self.nodes[a].to_string()));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(NetError::InvalidWeight(w));
        }
        match self.edges.get_mut(&(a, b)) {
            Some(x) => *x += w,
            None => {
                self.edges.insert((a, b), w);
                insert_sorted(&mut self.out_adj[a], b);
                insert_sorted(&mut self.in_adj[b], a);
            }
        }
        Ok(())
    }

    /// Sets edge a→b to exactly `w`, returning the previous weight.
    pub fn set_weight_ix(&mut self, a: usize, b: usize, w: f64) -> Result<Option<f64>, NetError> {
        let prev = self.remove_edge_ix(a, b);
        self.add_weight_ix(a, b, w)?;
        Ok(prev)
    }

    pub fn remove_edge_ix(&mut self, a: usize, b: usize) -> Option<f64> {
        let w = self.edges.remove(&(a, b))?;
        remove_sorted(&mut self.out_adj[a], b);
        remove_sorted(&mut self.in_adj[b], a);
        Some(w)
    }

    /// Subgraph induced by the given node indices.
    pub fn induced(&self, nodes: &[usize]) -> SupplyGraph {
        let mut g = SupplyGraph::new(nodes.iter().map(|&i| self.nodes[i].clone()));
        let member: HashMap<usize, usize> = nodes
            .iter()
            .map(|&i| (i, g.index[&self.nodes[i]]))
            .collect();
        for &i in nodes {
            for &j in &self.out_adj[i] {
                if let Some(&b) = member.get(&j) {
                    let a = member[&i];
                    g.edges.insert((a, b), self.edges[&(i, j)]);
                    g.out_adj[a].push(b);
                    g.in_adj[b].push(a);
                }
            }
        }
        for adj in g.out_adj.iter_mut().chain(g.in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        g
    }

    /// Compressed adjacency for traversals.
    pub fn adjacency(&self, mode: DistanceMode) -> Adjacency {
        let mut offsets = Vec::with_capacity(self.nodes.len() + 1);
        let mut targets = Vec::with_capacity(self.edges.len() * 2);
        offsets.push(0);
        for i in 0..self.nodes.len() {
            match mode {
                DistanceMode::Directed => targets.extend(self.out_adj[i].iter().map(|&j| j as u32)),
                DistanceMode::Undirected => {
                    let (mut a, mut b) = (self.out_adj[i].iter().peekable(), self.in_adj[i].iter().peekable());
                    loop {
                        let next = match (a.peek(), b.peek()) {
                            (Some(&&x), Some(&&y)) if x == y => {
                                a.next();
                                b.next();
                                x
                            }
                            (Some(&&x), Some(&&y)) if x < y => *a.next().unwrap(),
                            (Some(_), Some(_)) => *b.next().unwrap(),
                            (Some(_), None) => *a.next().unwrap(),
                            (None, Some(_)) => *b.next().unwrap(),
                            (None, None) => break,
                        };
                        targets.push(next as u32);
                    }
                }
            }
            offsets.push(targets.len());
        }
        Adjacency { offsets, targets }
    }

    /// Reverse adjacency: predecessors under `mode`.
    pub fn reverse_adjacency(&self, mode: DistanceMode) -> Adjacency {
        match mode {
            DistanceMode::Undirected => self.adjacency(mode),
            DistanceMode::Directed => {
                let mut offsets = Vec::with_capacity(self.nodes.len() + 1);
                let mut targets = Vec::with_capacity(self.edges.len());
                offsets.push(0);
                for i in 0..self.nodes.len() {
                    targets.extend(self.in_adj[i].iter().map(|&j| j as u32));
                    offsets.push(targets.len());
                }
                Adjacency { offsets, targets }
            }
        }
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

fn remove_sorted(v: &mut Vec<usize>, x: usize) {
    if let Ok(pos) = v.binary_search(&x) {
        v.remove(pos);
    }
}

#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Adds each route's supply to the edges between its consecutive stops.
/// Nodes are all itinerary stops; zero-weight edges are left out.
pub fn build_supply_graph(routes: &[RouteDef], supplies: &[RouteSupply]) -> SupplyGraph {
    let weight: HashMap<&str, f64> = supplies.iter().map(|s| (&*s.route_id, s.weight)).collect();
    let mut g = SupplyGraph::new(routes.iter().flat_map(|r| r.itinerary.iter().cloned()));
    for r in routes {
        let w = weight.get(&*r.route_id).copied().unwrap_or(0.0);
        if w <= 0.0 {
            continue;
        }
        for pair in r.itinerary.windows(2) {
            if pair[0] != pair[1] {
                g.add_weight(&pair[0], &pair[1], w).expect("itinerary stops are nodes");
            }
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component_count: usize,
    pub giant_size: usize,
    pub coverage: f64,
}

/// Weakly connected components as sorted node index lists, in order of their
/// smallest node.
pub fn weak_components(g: &SupplyGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (u, v, _) in g.edges() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Largest weakly connected component; ties go to the component holding the
/// smallest node id.
pub fn giant_component(g: &SupplyGraph) -> Result<(SupplyGraph, ComponentReport), NetError> {
    if g.node_count() == 0 {
        return Err(NetError::EmptyGraph);
    }
    let comps = weak_components(g);
    let giant = comps
        .iter()
        .reduce(|best, c| if c.len() > best.len() { c } else { best })
        .expect("nonempty");
    let report = ComponentReport {
        component_count: comps.len(),
        giant_size: giant.len(),
        coverage: giant.len() as f64 / g.node_count() as f64,
    };
    Ok((g.induced(giant), report))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    #[default]
    Directed,
    Undirected,
}

/// Hop distances from `source`; unreachable nodes are absent.
pub fn distances_from(g: &SupplyGraph, source: &str, mode: DistanceMode) -> Result<BTreeMap<Id, u32>, NetError> {
    let s = g.index_of(source).ok_or_else(|| NetError::UnknownNode(source.to_string()))?;
    let adj = g.adjacency(mode);
    let mut dist = vec![u32::MAX; g.node_count()];
    let mut queue = Vec::new();
    bfs(&adj, s, &mut dist, &mut queue);
    Ok(queue
        .iter()
        .map(|&v| (g.node_id(v as usize).clone(), dist[v as usize]))
        .collect())
}

/// Breadth-first search filling `dist` for reached nodes. `queue` ends up holding
/// the reached nodes in visiting order; `dist` must be all `u32::MAX` on entry.
fn bfs(adj: &Adjacency, s: usize, dist: &mut [u32], queue: &mut Vec<u32>) {
    queue.clear();
    dist[s] = 0;
    queue.push(s as u32);
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head] as usize;
        head += 1;
        let du = dist[u] + 1;
        for &v in adj.neighbors(u) {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = du;
                queue.push(v);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub exact_threshold: usize,
    pub samples: usize,
    pub seed: u64,
    pub mode: DistanceMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            exact_threshold: 20_000,
            samples: 1_000,
            seed: 42,
            mode: DistanceMode::Directed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub avg_path_length: f64,
    pub avg_eccentricity: f64,
    pub diameter: u32,
    pub node_count: usize,
    pub edge_count: usize,
    pub mode: DistanceMode,
    /// False when sources were sampled.
    pub exact: bool,
    pub sources: usize,
    pub reachable_pairs: u64,
    /// No reachable ordered pair exists.
    pub degenerate: bool,
    pub convention: String,
}

#[derive(Clone, Copy, Default)]
struct SourceSummary {
    dist_sum: u64,
    reached: u64,
    ecc: u32,
}

fn summarize_sources(adj: &Adjacency, sources: &[usize]) -> Vec<SourceSummary> {
    let n = adj.len();
    sources
        .par_iter()
        .map_init(
            || (vec![u32::MAX; n], Vec::with_capacity(n)),
            |(dist, queue), &s| {
                bfs(adj, s, dist, queue);
                let mut out = SourceSummary::default();
                for &v in queue.iter() {
                    let d = dist[v as usize];
                    out.dist_sum += d as u64;
                    out.ecc = out.ecc.max(d);
                    dist[v as usize] = u32::MAX;
                }
                out.reached = queue.len() as u64 - 1;
                out
            },
        )
        .collect()
}

/// Eccentricity per node (None when nothing is reachable from it).
pub fn eccentricities(g: &SupplyGraph, mode: DistanceMode) -> Vec<Option<u32>> {
    let adj = g.adjacency(mode);
    let all: Vec<usize> = (0..g.node_count()).collect();
    summarize_sources(&adj, &all)
        .into_iter()
        .map(|s| (s.reached > 0).then_some(s.ecc))
        .collect()
}

/// Average path length, average eccentricity and diameter in hops.
pub fn graph_metrics(g: &SupplyGraph, cfg: &MetricsConfig) -> Result<GraphMetrics, NetError> {
    let n = g.node_count();
    if n == 0 {
        return Err(NetError::EmptyGraph);
    }
    let exact = n < cfg.exact_threshold || cfg.samples >= n;
    let sources: Vec<usize> = if exact {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut s = sample(&mut rng, n, cfg.samples).into_vec();
        s.sort_unstable();
        s
    };
    let adj = g.adjacency(cfg.mode);
    let per_source = summarize_sources(&adj, &sources);
    let (mut dist_sum, mut pairs, mut ecc_sum, mut ecc_nodes, mut diameter) = (0u64, 0u64, 0u64, 0u64, 0u32);
    for s in &per_source {
        dist_sum += s.dist_sum;
        pairs += s.reached;
        if s.reached > 0 {
            ecc_sum += s.ecc as u64;
            ecc_nodes += 1;
            diameter = diameter.max(s.ecc);
        }
    }
    let degenerate = pairs == 0;
    Ok(GraphMetrics {
        avg_path_length: if degenerate { 0.0 } else { dist_sum as f64 / pairs as f64 },
        avg_eccentricity: if degenerate { 0.0 } else { ecc_sum as f64 / ecc_nodes as f64 },
        diameter,
        node_count: n,
        edge_count: g.edge_count(),
        mode: cfg.mode,
        exact,
        sources: sources.len(),
        reachable_pairs: pairs,
        degenerate,
        convention: "reachable_pairs".into(),
    })
}

const BETWEENNESS_CHUNK: usize = 64;

/// Shortest-path betweenness over ordered pairs, unnormalized, by dependency
/// accumulation over each source's BFS DAG.
pub fn betweenness(g: &SupplyGraph, mode: DistanceMode) -> Vec<f64> {
    let n = g.node_count();
    let adj = g.adjacency(mode);
    let radj = g.reverse_adjacency(mode);
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(BETWEENNESS_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut dist = vec![u32::MAX; n];
            let mut sigma = vec![0.0f64; n];
            let mut delta = vec![0.0f64; n];
            let mut queue = Vec::with_capacity(n);
            for &s in chunk {
                bfs(&adj, s, &mut dist, &mut queue);
                for &v in &queue {
                    sigma[v as usize] = 0.0;
                    delta[v as usize] = 0.0;
                }
                sigma[s] = 1.0;
                for &w in &queue[1..] {
                    let w = w as usize;
                    sigma[w] = radj
                        .neighbors(w)
                        .iter()
                        .filter(|&&v| dist[v as usize] != u32::MAX && dist[v as usize] + 1 == dist[w])
                        .map(|&v| sigma[v as usize])
                        .sum();
                }
                for &w in queue[1..].iter().rev() {
                    let w = w as usize;
                    let coeff = (1.0 + delta[w]) / sigma[w];
                    for &v in radj.neighbors(w) {
                        let v = v as usize;
                        if dist[v] != u32::MAX && dist[v] + 1 == dist[w] {
                            delta[v] += sigma[v] * coeff;
                        }
                    }
                    acc[w] += delta[w];
                }
                for &v in &queue {
                    dist[v as usize] = u32::MAX;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// |E| / (n(n−1)); undefined below two nodes.
    pub density: Option<f64>,
    pub avg_clustering: f64,
    pub avg_weighted_degree: f64,
}

/// Density, average clustering on the symmetrized view and average weighted
/// in+out degree of the subgraph induced by `nodes`.
pub fn local_stats(g: &SupplyGraph, nodes: &[usize]) -> LocalStats {
    let sub = g.induced(nodes);
    let n = sub.node_count();
    let e = sub.edge_count();
    let density = (n >= 2).then(|| e as f64 / (n as f64 * (n as f64 - 1.0)));
    let undirected = sub.adjacency(DistanceMode::Undirected);
    let mut clustering_sum = 0.0;
    for v in 0..n {
        let nb = undirected.neighbors(v);
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in nb.iter().enumerate() {
            let na = undirected.neighbors(a as usize);
            for &b in &nb[i + 1..] {
                if na.binary_search(&b).is_ok() {
                    links += 1;
                }
            }
        }
        clustering_sum += links as f64 / (k * (k - 1) / 2) as f64;
    }
    let weighted_degree_sum = 2.0 * sub.total_weight();
    LocalStats {
        node_count: n,
        edge_count: e,
        density,
        avg_clustering: if n == 0 { 0.0 } else { clustering_sum / n as f64 },
        avg_weighted_degree: if n == 0 { 0.0 } else { weighted_degree_sum / n as f64 },
    }
}

/// Weighted in+out degree of each node in the full graph.
pub fn weighted_degrees(g: &SupplyGraph) -> Vec<f64> {
    let mut d = vec![0.0; g.node_count()];
    for (u, v, w) in g.edges() {
        d[u] += w;
        d[v] += w;
    }
    d
}

pub fn write_edges<W: Write>(w: W, g: &SupplyGraph) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["src", "dst", "weight"]).map_err(io::Error::other)?;
    for (u, v, wt) in g.edges() {
        wr.write_record([&**g.node_id(u), &**g.node_id(v), &wt.to_string()])
            .map_err(io::Error::other)?;
    }
    wr.flush()
}

/// Reads an edge list; `extra_nodes` are added as (possibly isolated) nodes.
pub fn read_edges(path: &Path, extra_nodes: impl IntoIterator<Item = Id>) -> io::Result<SupplyGraph> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    if rdr.headers().map_err(io::Error::other)?.iter().ne(["src", "dst", "weight"]) {
        return Err(bad(format!("{}: unexpected header", path.display())));
    }
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let r = rec.map_err(io::Error::other)?;
        let w: f64 = r[2].parse().map_err(|e| bad(format!("weight: {e}")))?;
        edges.push((Id::from(&r[0]), Id::from(&r[1]), w));
    }
    let mut g = SupplyGraph::new(
        edges
            .iter()
            .flat_map(|(a, b, _)| [a.clone(), b.clone()])
            .chain(extra_nodes),
    );
    for (a, b, w) in &edges {
        g.add_weight(a, b, *w).map_err(|e| bad(e.to_string()))?;
    }
    Ok(g)
}

pub fn write_supplies<W: Write>(w: W, supplies: &[RouteSupply]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["route_id", "vehicles", "completions", "weight"])
        .map_err(io::Error::other)?;
    for s in supplies {
        wr.write_record([
            s.route_id.to_string(),
            s.vehicles.to_string(),
            s.completions.to_string(),
            s.weight.to_string(),
        ])
        .map_err(io::Error::other)?;
    }
    wr.flush()
}

/// GeoJSON with a Point per node and a LineString per edge. `node_props` adds
/// properties to node features.
pub fn graph_geojson(
    g: &SupplyGraph,
    coords: &HashMap<Id, Coord>,
    node_props: impl Fn(usize) -> serde_json::Map<String, Value>,
) -> Value {
    let mut features = Vec::with_capacity(g.node_count() + g.edge_count());
    for (i, id) in g.nodes().iter().enumerate() {
        let Some(c) = coords.get(id) else { continue };
        let mut props = node_props(i);
        props.insert("stop_id".into(), json!(id));
        props.insert("kind".into(), json!("stop"));
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [c.lon, c.lat]},
            "properties": props,
        }));
    }
    for (u, v, w) in g.edges() {
        let (Some(a), Some(b)) = (coords.get(g.node_id(u)), coords.get(g.node_id(v))) else {
            continue;
        };
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[a.lon, a.lat], [b.lon, b.lat]]},
            "properties": {"kind": "edge", "src": g.node_id(u), "dst": g.node_id(v), "weight": w},
        }));
    }
    json!({"type": "FeatureCollection", "features": features})
}
