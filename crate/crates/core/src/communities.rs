//! Louvain community detection on the symmetrized supply graph and
//! per-community structural statistics.

use std::collections::HashMap;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Id;
use crate::netcore::{graph_metrics, local_stats, DistanceMode, MetricsConfig, SupplyGraph};

#[derive(Debug, Error, PartialEq)]
pub enum CommunityError {
    #[error("graph is empty")]
    EmptyGraph,
    #[error("total edge weight is zero")]
    ZeroWeight,
    #[error("assignment covers {got} nodes, graph has {expected}")]
    AssignmentLength { expected: usize, got: usize },
}

/// Undirected weighted graph with self-loops, the working form for Louvain.
/// `loops[i]` holds A_ii; a loop contributes A_ii to the degree of i.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl WeightedGraph {
    /// Undirected edges (i, j, w); repeated pairs add up. Zero weights are kept.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        let mut loops = vec![0.0; n];
        for &(i, j, w) in edges {
            if i == j {
                loops[i] += 2.0 * w;
            } else {
                *merged.entry((i.min(j), i.max(j))).or_default() += w;
            }
        }
        let mut adj = vec![Vec::new(); n];
        for (&(i, j), &w) in &merged {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for a in &mut adj {
            a.sort_by_key(|e| e.0);
        }
        WeightedGraph { adj, loops }
    }

    /// A_ij = w_ij + w_ji.
    pub fn from_supply(g: &SupplyGraph) -> Self {
        let edges: Vec<(usize, usize, f64)> = g.edges().collect();
        Self::from_edges(g.node_count(), &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|e| e.1).sum::<f64>() + self.loops[i]
    }

    /// 2m, the sum of all degrees.
    pub fn total_degree(&self) -> f64 {
        (0..self.node_count()).map(|i| self.degree(i)).sum()
    }

    fn aggregate(&self, community: &[usize], count: usize) -> WeightedGraph {
        let mut loops = vec![0.0; count];
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for i in 0..self.node_count() {
            let ci = community[i];
            loops[ci] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                let cj = community[j];
                if ci == cj {
                    loops[ci] += w;
                } else if ci < cj {
                    *merged.entry((ci, cj)).or_default() += w;
                }
            }
        }
        let mut adj = vec![Vec::new(); count];
        for (&(a, b), &w) in &merged {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for a in &mut adj {
            a.sort_by_key(|e| e.0);
        }
        WeightedGraph { adj, loops }
    }
}

/// Q = Σ_c [Σ_in/2m − γ (Σ_tot/2m)²] on a weighted graph.
pub fn modularity_weighted(g: &WeightedGraph, assignment: &[usize], resolution: f64) -> Result<f64, CommunityError> {
    let n = g.node_count();
    if assignment.len() != n {
        return Err(CommunityError::AssignmentLength {
            expected: n,
            got: assignment.len(),
        });
    }
    let two_m = g.total_degree();
    if two_m <= 0.0 {
        return Err(CommunityError::ZeroWeight);
    }
    let count = assignment.iter().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; count];
    let mut total = vec![0.0; count];
    for i in 0..n {
        let c = assignment[i];
        inside[c] += g.loops[i];
        total[c] += g.degree(i);
        for &(j, w) in &g.adj[i] {
            if assignment[j] == c {
                inside[c] += w;
            }
        }
    }
    Ok(inside
        .iter()
        .zip(&total)
        .map(|(s_in, s_tot)| s_in / two_m - resolution * (s_tot / two_m).powi(2))
        .sum())
}

/// Modularity of `assignment` on the symmetrized supply graph.
pub fn modularity(g: &SupplyGraph, assignment: &[usize]) -> Result<f64, CommunityError> {
    modularity_with_resolution(g, assignment, 1.0)
}

pub fn modularity_with_resolution(g: &SupplyGraph, assignment: &[usize], resolution: f64) -> Result<f64, CommunityError> {
    modularity_weighted(&WeightedGraph::from_supply(g), assignment, resolution)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community per node index, dense from 0 in order of first appearance.
    pub assignment: Vec<usize>,
    pub community_count: usize,
    pub modularity: f64,
    /// Aggregation passes that changed the partition.
    pub levels: usize,
    /// Q after each level.
    pub level_modularity: Vec<f64>,
}

impl Partition {
    pub fn members(&self, community: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == community).collect()
    }
}

fn renumber(labels: &mut [usize]) -> usize {
    let mut map: HashMap<usize, usize> = HashMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    map.len()
}

/// One local-move phase. Returns the community per node and whether any node moved.
fn local_moves(g: &WeightedGraph, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = g.node_count();
    let two_m = g.total_degree();
    let k: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let mut community: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &i in &order {
            let ci = community[i];
            touched.clear();
            for &(j, w) in &g.adj[i] {
                let cj = community[j];
                if link[cj] == 0.0 && !touched.contains(&cj) {
                    touched.push(cj);
                }
                link[cj] += w;
            }
            tot[ci] -= k[i];
            let gain = |c: usize, l: f64| l - resolution * tot[c] * k[i] / two_m;
            let stay = gain(ci, if touched.contains(&ci) { link[ci] } else { 0.0 });
            let mut best = (ci, stay);
            for &c in &touched {
                let gc = gain(c, link[c]);
                if gc > best.1 {
                    best = (c, gc);
                }
            }
            tot[best.0] += k[i];
            if best.0 != ci {
                community[i] = best.0;
                moved = true;
                moved_any = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
        }
        if !moved {
            break;
        }
    }
    (community, moved_any)
}

/// Louvain on a weighted graph: local moves by modularity gain, then
/// aggregation of communities into nodes with self-loops, until a level leaves
/// the partition unchanged. Visit order is shuffled by `seed`.
pub fn louvain_weighted(g: &WeightedGraph, seed: u64, resolution: f64) -> Result<Partition, CommunityError> {
    let n = g.node_count();
    if n == 0 {
        return Err(CommunityError::EmptyGraph);
    }
    if g.total_degree() <= 0.0 {
        return Err(CommunityError::ZeroWeight);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut level_graph = g.clone();
    let mut level_modularity = Vec::new();
    loop {
        let (mut community, moved) = local_moves(&level_graph, resolution, &mut rng);
        if !moved {
            break;
        }
        let count = renumber(&mut community);
        for a in assignment.iter_mut() {
            *a = community[*a];
        }
        level_graph = level_graph.aggregate(&community, count);
        let identity: Vec<usize> = (0..count).collect();
        level_modularity.push(modularity_weighted(&level_graph, &identity, resolution)?);
    }
    let community_count = renumber(&mut assignment);
    let modularity = match level_modularity.last() {
        Some(&q) => q,
        None => modularity_weighted(&level_graph, &(0..level_graph.node_count()).collect::<Vec<_>>(), resolution)?,
    };
    Ok(Partition {
        assignment,
        community_count,
        modularity,
        levels: level_modularity.len(),
        level_modularity,
    })
}

pub fn louvain(g: &SupplyGraph, seed: u64, resolution: f64) -> Result<Partition, CommunityError> {
    louvain_weighted(&WeightedGraph::from_supply(g), seed, resolution)
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return if a == b || table.len() == rows.len().max(cols.len()) { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityStats {
    pub id: usize,
    pub node_count: usize,
    pub diameter: u32,
    pub normalized_diameter: f64,
    /// 0 with `density_defined` false for single-node communities.
    pub density: f64,
    pub density_defined: bool,
    pub avg_clustering: f64,
    /// Over intra-community edges.
    pub avg_weighted_degree: f64,
    /// Over all edges of the member nodes in the full graph.
    pub avg_weighted_degree_full: f64,
    /// Total weight of edges with exactly one endpoint in the community.
    pub cross_weight: f64,
}

pub fn normalized_diameter(diameter: u32, node_count: usize) -> f64 {
    diameter as f64 / node_count as f64
}

/// Statistics for every community, in id order.
pub fn community_stats(g: &SupplyGraph, partition: &Partition, mode: DistanceMode) -> Vec<CommunityStats> {
    let full_degree = crate::netcore::weighted_degrees(g);
    (0..partition.community_count)
        .into_par_iter()
        .map(|c| {
            let members = partition.members(c);
            let local = local_stats(g, &members);
            let sub = g.induced(&members);
            let metrics = graph_metrics(
                &sub,
                &MetricsConfig {
                    mode,
                    ..Default::default()
                },
            )
            .expect("community is nonempty");
            let n = members.len();
            let full: f64 = members.iter().map(|&i| full_degree[i]).sum();
            let intra = 2.0 * sub.total_weight();
            CommunityStats {
                id: c,
                node_count: n,
                diameter: metrics.diameter,
                normalized_diameter: normalized_diameter(metrics.diameter, n),
                density: local.density.unwrap_or(0.0),
                density_defined: local.density.is_some(),
                avg_clustering: local.avg_clustering,
                avg_weighted_degree: local.avg_weighted_degree,
                avg_weighted_degree_full: full / n as f64,
                cross_weight: full - intra,
            }
        })
        .collect()
}

/// Truncates to three decimals for tables.
pub fn table_decimal(x: f64) -> String {
    format!("{:.3}", (x * 1000.0 + 1e-9).floor() / 1000.0)
}

pub fn write_assignment<W: Write>(w: W, g: &SupplyGraph, partition: &Partition) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["node_id", "community_id"]).map_err(io::Error::other)?;
    for (i, c) in partition.assignment.iter().enumerate() {
        wr.write_record([&**g.node_id(i), &c.to_string()])
            .map_err(io::Error::other)?;
    }
    wr.flush()
}

pub fn read_assignment(path: &Path) -> io::Result<Vec<(Id, usize)>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    if rdr.headers().map_err(io::Error::other)?.iter().ne(["node_id", "community_id"]) {
        return Err(bad(format!("{}: unexpected header", path.display())));
    }
    rdr.records()
        .map(|rec| {
            let r = rec.map_err(io::Error::other)?;
            let c = r[1].parse().map_err(|e| bad(format!("community_id: {e}")))?;
            Ok((Id::from(&r[0]), c))
        })
        .collect()
}

pub fn write_stats<W: Write>(w: W, stats: &[CommunityStats]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "community",
        "node_count",
        "diameter",
        "normalized_diameter",
        "density",
        "avg_clustering",
        "avg_weighted_degree",
        "avg_weighted_degree_full",
        "cross_weight",
    ])
    .map_err(io::Error::other)?;
    for s in stats {
        wr.write_record([
            s.id.to_string(),
            s.node_count.to_string(),
            s.diameter.to_string(),
            s.normalized_diameter.to_string(),
            if s.density_defined { s.density.to_string() } else { String::new() },
            s.avg_clustering.to_string(),
            s.avg_weighted_degree.to_string(),
            s.avg_weighted_degree_full.to_string(),
            s.cross_weight.to_string(),
        ])
        .map_err(io::Error::other)?;
    }
    wr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> WeightedGraph {
        WeightedGraph::from_edges(6, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)])
    }

    /// Every set partition of 0..n in restricted-growth form.
    fn set_partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = vec![0; n];
        fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for c in 0..=max + 1 {
                cur[i] = c;
                rec(i + 1, max.max(c), cur, out);
            }
        }
        if n > 0 {
            rec(1, 0, &mut cur, &mut out);
        }
        out
    }

    /// Q = 1/2m Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j) from a dense matrix.
    fn dense_modularity(a: &[Vec<f64>], labels: &[usize]) -> f64 {
        let n = a.len();
        let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let two_m: f64 = k.iter().sum();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    q += a[i][j] - k[i] * k[j] / two_m;
                }
            }
        }
        q / two_m
    }

    fn dense(g: &WeightedGraph) -> Vec<Vec<f64>> {
        let n = g.node_count();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = g.loops[i];
            for &(j, w) in &g.adj[i] {
                a[i][j] = w;
            }
        }
        a
    }

    #[test]
    fn bridged_triangles_split_in_two() {
        let g = two_triangles();
        let a = dense(&g);
        let best = set_partitions(6)
            .into_iter()
            .map(|p| (dense_modularity(&a, &p), p))
            .fold((f64::NEG_INFINITY, vec![]), |b, c| if c.0 > b.0 + 1e-12 { c } else { b });
        assert_eq!(best.1, vec![0, 0, 0, 1, 1, 1]);
        for seed in 0..10 {
            let p = louvain_weighted(&g, seed, 1.0).unwrap();
            assert_eq!(p.community_count, 2);
            assert_eq!(adjusted_rand_index(&p.assignment, &best.1), 1.0);
            assert!((p.modularity - best.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_bridge_keeps_cliques_apart() {
        let mut e = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    e.push((base + i, base + j, 1.0));
                }
            }
        }
        e.push((3, 4, 0.0));
        let p = louvain_weighted(&WeightedGraph::from_edges(8, &e), 1, 1.0).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn modularity_identities() {
        let g = two_triangles();
        assert!(modularity_weighted(&g, &[0; 6], 1.0).unwrap().abs() < 1e-15);
        let edge = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]);
        assert!((modularity_weighted(&edge, &[0, 1], 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(
            modularity_weighted(&edge, &[0], 1.0),
            Err(CommunityError::AssignmentLength { expected: 2, got: 1 })
        );
        let empty = WeightedGraph::from_edges(2, &[(0, 1, 0.0)]);
        assert_eq!(modularity_weighted(&empty, &[0, 1], 1.0), Err(CommunityError::ZeroWeight));
    }

    #[test]
    fn aggregated_modularity_matches_dense_formula() {
        let g = two_triangles();
        let a = dense(&g);
        for p in set_partitions(6) {
            let q = modularity_weighted(&g, &p, 1.0).unwrap();
            assert!((q - dense_modularity(&a, &p)).abs() < 1e-12);
            let count = p.iter().max().unwrap() + 1;
            let agg = g.aggregate(&p, count);
            let q_agg = modularity_weighted(&agg, &(0..count).collect::<Vec<_>>(), 1.0).unwrap();
            assert!((q - q_agg).abs() < 1e-12);
        }
    }

    #[test]
    fn supply_graph_is_symmetrized() {
        let g = SupplyGraph::from_edges(&[("A".into(), "B".into(), 2.0), ("B".into(), "A".into(), 3.0)]).unwrap();
        let w = WeightedGraph::from_supply(&g);
        assert_eq!(w.adj[0], vec![(1, 5.0)]);
        assert_eq!(w.total_degree(), 10.0);
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]), 1.0);
        // Hand-computed: contingency [[2,1],[0,2]] gives index 2, sums 4 and 4 over 10 pairs.
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]);
        let expected = (1.0 + 1.0 - 4.0 * 4.0 / 10.0) / (4.0 - 1.6);
        assert!((ari - expected).abs() < 1e-12);
    }

    #[test]
    fn table_truncation() {
        assert_eq!(table_decimal(63.0 / 701.0), "0.089");
        assert_eq!(table_decimal(106.0 / 434.0), "0.244");
        assert_eq!(table_decimal(0.5), "0.500");
    }

    #[test]
    fn singleton_community_stats() {
        let g = SupplyGraph::from_edges(&[("A".into(), "B".into(), 1.0), ("B".into(), "A".into(), 1.0)]).unwrap();
        let p = Partition {
            assignment: vec![0, 1],
            community_count: 2,
            modularity: -0.5,
            levels: 0,
            level_modularity: vec![],
        };
        let s = community_stats(&g, &p, DistanceMode::Directed);
        assert_eq!(s[0].diameter, 0);
        assert_eq!(s[0].normalized_diameter, 0.0);
        assert!(!s[0].density_defined);
        assert_eq!(s[0].avg_weighted_degree, 0.0);
        assert_eq!(s[0].avg_weighted_degree_full, 2.0);
        assert_eq!(s[0].cross_weight, 2.0);
    }
}
