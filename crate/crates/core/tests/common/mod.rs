//! Brute-force oracles and graph generators shared by the integration tests.
#![allow(dead_code)]

use busnet::communities::Partition;
use busnet::flows::FlowMatrix;
use busnet::netcore::{DistanceMode, SupplyGraph};
use busnet::{DayClass, Id};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: u32 = u32::MAX;

pub fn node_name(i: usize) -> Id {
    Id::from(format!("n{i:04}"))
}

/// Directed graph on `n` nodes, each ordered pair an edge with probability `p`.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> SupplyGraph {
    let mut g = SupplyGraph::new((0..n).map(node_name));
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                g.add_weight_ix(u, v, rng.random_range(1..20) as f64).unwrap();
            }
        }
    }
    g
}

/// Strongly connected digraph with `k` planted groups: a directed cycle through
/// every node, dense directed edges inside groups and a few between them.
pub fn clustered_digraph(rng: &mut ChaCha8Rng, n: usize, k: usize) -> SupplyGraph {
    let mut g = SupplyGraph::new((0..n).map(node_name));
    let group = |i: usize| i * k / n;
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for i in 0..n {
        g.add_weight_ix(order[i], order[(i + 1) % n], 1.0).unwrap();
    }
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let p = if group(u) == group(v) { 0.15 } else { 0.004 };
            if rng.random_bool(p) {
                g.add_weight_ix(u, v, rng.random_range(1..10) as f64).unwrap();
            }
        }
    }
    g
}

/// Hop distance matrix by Floyd–Warshall.
pub fn floyd_warshall(g: &SupplyGraph, mode: DistanceMode) -> Vec<Vec<u32>> {
    let n = g.node_count();
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (u, v, _) in g.edges() {
        d[u][v] = 1;
        if mode == DistanceMode::Undirected {
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                if d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

pub struct OracleMetrics {
    pub apl: f64,
    pub avg_ecc: f64,
    pub diameter: u32,
    pub ecc: Vec<Option<u32>>,
}

/// APL over reachable ordered pairs, eccentricity per node over the nodes it reaches.
pub fn oracle_metrics(d: &[Vec<u32>]) -> OracleMetrics {
    let n = d.len();
    let (mut sum, mut pairs) = (0u64, 0u64);
    let mut ecc = vec![None; n];
    for s in 0..n {
        for t in 0..n {
            if s != t && d[s][t] != INF {
                sum += d[s][t] as u64;
                pairs += 1;
                ecc[s] = Some(ecc[s].unwrap_or(0).max(d[s][t]));
            }
        }
    }
    let with: Vec<u32> = ecc.iter().flatten().copied().collect();
    OracleMetrics {
        apl: if pairs == 0 { 0.0 } else { sum as f64 / pairs as f64 },
        avg_ecc: if with.is_empty() {
            0.0
        } else {
            with.iter().map(|&e| e as f64).sum::<f64>() / with.len() as f64
        },
        diameter: with.iter().copied().max().unwrap_or(0),
        ecc,
    }
}

fn has_edge(g: &SupplyGraph, mode: DistanceMode, u: usize, v: usize) -> bool {
    g.weight(u, v).is_some() || (mode == DistanceMode::Undirected && g.weight(v, u).is_some())
}

/// Number of shortest paths between every ordered pair, counted from the
/// distance matrix: a shortest s-t path ends with an edge u -> t where
/// d(s, u) + 1 = d(s, t).
pub fn path_counts(g: &SupplyGraph, mode: DistanceMode, d: &[Vec<u32>]) -> Vec<Vec<f64>> {
    let n = d.len();
    let mut sigma = vec![vec![0.0; n]; n];
    for s in 0..n {
        let mut by_dist: Vec<usize> = (0..n).filter(|&t| d[s][t] != INF).collect();
        by_dist.sort_by_key(|&t| d[s][t]);
        sigma[s][s] = 1.0;
        for &t in &by_dist[1..] {
            sigma[s][t] = (0..n)
                .filter(|&u| d[s][u] != INF && d[s][u] + 1 == d[s][t] && has_edge(g, mode, u, t))
                .map(|u| sigma[s][u])
                .sum();
        }
    }
    sigma
}

/// Betweenness as the sum over ordered pairs s != v != t of the share of
/// shortest s-t paths through v.
pub fn oracle_betweenness(g: &SupplyGraph, mode: DistanceMode) -> Vec<f64> {
    let d = floyd_warshall(g, mode);
    let sigma = path_counts(g, mode, &d);
    let n = d.len();
    let mut b = vec![0.0; n];
    for (v, bv) in b.iter_mut().enumerate() {
        for s in 0..n {
            if s == v || d[s][v] == INF {
                continue;
            }
            for t in 0..n {
                if t == s || t == v || d[v][t] == INF || d[s][t] == INF {
                    continue;
                }
                if d[s][v] + d[v][t] == d[s][t] {
                    *bv += sigma[s][v] * sigma[v][t] / sigma[s][t];
                }
            }
        }
    }
    b
}

/// Every shortest path by explicit enumeration of simple paths, for small graphs.
/// Returns betweenness counted path by path.
pub fn enumerated_betweenness(g: &SupplyGraph, mode: DistanceMode) -> Vec<f64> {
    let n = g.node_count();
    let mut b = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![s];
            let mut on = vec![false; n];
            on[s] = true;
            enumerate(g, mode, t, &mut stack, &mut on, &mut paths);
            let Some(best) = paths.iter().map(|p| p.len()).min() else {
                continue;
            };
            let shortest: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == best).collect();
            for p in &shortest {
                for &v in &p[1..p.len() - 1] {
                    b[v] += 1.0 / shortest.len() as f64;
                }
            }
        }
    }
    b
}

fn enumerate(
    g: &SupplyGraph,
    mode: DistanceMode,
    target: usize,
    stack: &mut Vec<usize>,
    on: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    let u = *stack.last().unwrap();
    if u == target {
        out.push(stack.clone());
        return;
    }
    for v in 0..g.node_count() {
        if !on[v] && has_edge(g, mode, u, v) {
            on[v] = true;
            stack.push(v);
            enumerate(g, mode, target, stack, on, out);
            stack.pop();
            on[v] = false;
        }
    }
}

/// Weekday flow matrix with random counts between communities.
pub fn random_flows(rng: &mut ChaCha8Rng, partition: &Partition) -> FlowMatrix {
    let k = partition.community_count;
    let mut m = FlowMatrix::new(DayClass::Weekday, k);
    for row in m.counts.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.random_range(0..1000);
        }
    }
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Modularity straight from the definition on the symmetrized adjacency
/// A_ij = w_ij + w_ji: (1/2m) Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j).
pub fn oracle_modularity(g: &SupplyGraph, assignment: &[usize]) -> f64 {
    let n = g.node_count();
    let mut k = vec![0.0; n];
    let mut inside = 0.0;
    for (u, v, w) in g.edges() {
        k[u] += w;
        k[v] += w;
        if assignment[u] == assignment[v] {
            inside += 2.0 * w;
        }
    }
    let two_m: f64 = k.iter().sum();
    let groups = assignment.iter().max().map_or(0, |m| m + 1);
    let mut tot = vec![0.0; groups];
    for i in 0..n {
        tot[assignment[i]] += k[i];
    }
    inside / two_m - tot.iter().map(|t| t * t).sum::<f64>() / (two_m * two_m)
}
