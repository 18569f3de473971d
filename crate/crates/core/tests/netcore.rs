mod common;

use approx::assert_abs_diff_eq;
use busnet::netcore::{betweenness, eccentricities, graph_metrics, DistanceMode, MetricsConfig, SupplyGraph};
use common::*;
use proptest::prelude::*;

fn exact() -> MetricsConfig {
    MetricsConfig::default()
}

#[test]
fn metrics_match_floyd_warshall() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let n = 5 + (seed as usize * 7) % 60;
        let g = random_digraph(&mut r, n, 2.5 / n as f64);
        for mode in [DistanceMode::Directed, DistanceMode::Undirected] {
            let m = graph_metrics(&g, &MetricsConfig { mode, ..exact() }).unwrap();
            let o = oracle_metrics(&floyd_warshall(&g, mode));
            assert_abs_diff_eq!(m.avg_path_length, o.apl, epsilon = 1e-9);
            assert_abs_diff_eq!(m.avg_eccentricity, o.avg_ecc, epsilon = 1e-9);
            assert_eq!(m.diameter, o.diameter);
            assert_eq!(eccentricities(&g, mode), o.ecc);
        }
    }
}

#[test]
fn betweenness_matches_path_enumeration() {
    for seed in 0..30 {
        let mut r = rng(100 + seed);
        let n = 3 + seed as usize % 7;
        let g = random_digraph(&mut r, n, 0.35);
        for mode in [DistanceMode::Directed, DistanceMode::Undirected] {
            let fast = betweenness(&g, mode);
            let slow = enumerated_betweenness(&g, mode);
            let counted = oracle_betweenness(&g, mode);
            for i in 0..n {
                assert_abs_diff_eq!(fast[i], slow[i], epsilon = 1e-9);
                assert_abs_diff_eq!(counted[i], slow[i], epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn bidirected_path_of_five() {
    let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
    let mut edges = Vec::new();
    for w in ids.windows(2) {
        edges.push((w[0].as_str().into(), w[1].as_str().into(), 1.0));
        edges.push((w[1].as_str().into(), w[0].as_str().into(), 1.0));
    }
    let g = SupplyGraph::from_edges(&edges).unwrap();
    let m = graph_metrics(&g, &exact()).unwrap();
    assert_eq!(m.diameter, 4);
    assert_abs_diff_eq!(m.avg_eccentricity, 3.2, epsilon = 1e-12);
    assert_abs_diff_eq!(m.avg_path_length, 2.0, epsilon = 1e-12);
    assert_eq!(betweenness(&g, DistanceMode::Directed), [0.0, 6.0, 8.0, 6.0, 0.0]);
}

#[test]
fn sampled_apl_close_to_exact() {
    let mut r = rng(7);
    let g = clustered_digraph(&mut r, 2000, 8);
    let full = graph_metrics(&g, &exact()).unwrap();
    let sampled = graph_metrics(
        &g,
        &MetricsConfig {
            exact_threshold: 1000,
            samples: 1000,
            ..exact()
        },
    )
    .unwrap();
    assert!(full.exact && !sampled.exact);
    assert_eq!(sampled.sources, 1000);
    let rel = (sampled.avg_path_length - full.avg_path_length).abs() / full.avg_path_length;
    assert!(rel < 0.05, "{rel}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn added_edge_never_lengthens_paths(seed in any::<u64>(), n in 4usize..40, extra in any::<(u16, u16)>()) {
        let mut r = rng(seed);
        let g = clustered_digraph(&mut r, n, 2);
        let before = graph_metrics(&g, &exact()).unwrap();
        let (u, v) = (extra.0 as usize % n, extra.1 as usize % n);
        prop_assume!(u != v);
        let mut h = g.clone();
        h.add_weight_ix(u, v, 1.0).unwrap();
        let after = graph_metrics(&h, &exact()).unwrap();
        prop_assert!(after.avg_path_length <= before.avg_path_length + 1e-12);
        prop_assert!(after.avg_eccentricity <= before.avg_eccentricity + 1e-12);
        prop_assert!(after.diameter <= before.diameter);
        prop_assert!(after.avg_path_length <= after.avg_eccentricity + 1e-12);
        prop_assert!(after.avg_eccentricity <= after.diameter as f64 + 1e-12);
    }

    #[test]
    fn betweenness_sums_to_interior_path_lengths(seed in any::<u64>(), n in 2usize..30) {
        let mut r = rng(seed);
        let g = random_digraph(&mut r, n, 0.2);
        let d = floyd_warshall(&g, DistanceMode::Directed);
        let expected: f64 = d
            .iter()
            .flatten()
            .filter(|&&x| x != INF && x > 0)
            .map(|&x| (x - 1) as f64)
            .sum();
        let total: f64 = betweenness(&g, DistanceMode::Directed).iter().sum();
        prop_assert!((total - expected).abs() < 1e-9 * expected.max(1.0));
    }
}
