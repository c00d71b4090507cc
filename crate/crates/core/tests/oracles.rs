mod common;

use common::*;
use esd_mesh::metric::{path_cost, path_cost_by_links};
use esd_mesh::routing::{bellman_ford, link_weights_from_states, route_cost, route_with_weights, LinkWeights};
use esd_mesh::{MetricKind, NodeId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_ford_matches_dijkstra(seed in any::<u64>(), n in 2usize..=25, p in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(&mut rng, n, p);
        let w = random_weights(&mut rng, &g);
        let src = NodeId(seed as usize % n);
        let sp = bellman_ford(&g, &w, src).unwrap();
        let oracle = dijkstra(&g, &w, src);
        for v in g.nodes() {
            prop_assert!((sp.dist[v.index()] - oracle[v.index()]).abs() <= 1e-9);
            let path = sp.path_to(v).unwrap();
            prop_assert!(is_simple(path));
            prop_assert!((links_cost(&w, path) - oracle[v.index()]).abs() <= 1e-9);
        }
    }

    #[test]
    fn routes_match_exhaustive_enumeration(seed in any::<u64>(), n in 2usize..=9, p in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(&mut rng, n, p);
        let w = random_weights(&mut rng, &g);
        for s in g.nodes() {
            for d in g.nodes().filter(|&d| d != s) {
                let r = route_with_weights(&g, &w, s, d).unwrap();
                let (best_cost, best_path) = brute_force_best(&g, &w, s, d).unwrap();
                prop_assert_eq!(r.nodes(), best_path.as_slice());
                prop_assert!((route_cost(&w, &r).unwrap() - best_cost).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn hotspot_path_costs_by_enumeration() {
    let (g, st) = hotspot();
    let paths = simple_paths(&g, NodeId(0), NodeId(8));
    // Monotone corner-to-corner paths: C(4,2).
    assert_eq!(paths.iter().filter(|p| p.len() == 5).count(), 6);
    let through = ids(&[0, 1, 4, 5, 8]);
    let around = ids(&[0, 1, 2, 5, 8]);
    assert_eq!(path_cost(&g, &through, &st).unwrap(), 144.0);
    assert_eq!(path_cost(&g, &around, &st).unwrap(), 90.0);
    assert_eq!(path_cost_by_links(&g, &through, &st).unwrap(), 144.0);

    let w = link_weights_from_states(&g, &st, MetricKind::Esd);
    assert_eq!(route_cost(&w, &through), Some(126.0));
    assert_eq!(route_cost(&w, &around), Some(72.0));

    // Link-sum and node-sum orderings agree on every path, because the
    // endpoint terms are shared.
    let best_nodes = paths.iter().map(|p| path_cost(&g, p, &st).unwrap()).fold(f64::INFINITY, f64::min);
    let (best_links, best) = brute_force_best(&g, &w, NodeId(0), NodeId(8)).unwrap();
    assert_eq!(best_nodes, 90.0);
    assert_eq!(best_links, 72.0);
    assert!(!best.contains(&NodeId(4)));
}

#[test]
fn hop_count_weights_give_bfs_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let g = random_connected(&mut rng, 15, 0.15);
        let w: LinkWeights = link_weights_from_states(&g, &[], MetricKind::HopCount);
        let sp = bellman_ford(&g, &w, NodeId(0)).unwrap();
        let bfs = g.bfs_distances(NodeId(0)).unwrap();
        for v in g.nodes() {
            assert_eq!(sp.dist[v.index()], bfs[v.index()].unwrap() as f64);
        }
    }
}
