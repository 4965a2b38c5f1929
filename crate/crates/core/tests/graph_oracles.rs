mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use routesim_core::graph::{bellman_ford, dijkstra, extract_path, Dist, Graph, GraphError};

fn graph_strategy(max_nodes: u32, weights: Vec<i64>) -> impl Strategy<Value = Graph> {
    (1..=max_nodes, any::<u64>(), 0.1f64..0.9).prop_map(move |(nodes, seed, density)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_digraph(&mut rng, nodes, &weights, density)
    })
}

fn check_positive(g: &Graph) {
    for src in g.nodes() {
        let d = dijkstra(g, src).unwrap();
        let b = bellman_ford(g, src).unwrap();
        let oracle = brute_force_distances(g, src);
        assert_eq!(d.distances(), &oracle);
        assert_eq!(b.distances(), &oracle);
        assert_eq!(d.predecessors(), b.predecessors());
        for v in g.nodes() {
            if let Dist::Finite(dv) = oracle[&v] {
                let path = extract_path(&d, v).unwrap();
                let cost: i64 = path.windows(2).map(|w| g.weight(w[0], w[1]).unwrap()).sum();
                assert_eq!(cost, dv);
            } else {
                assert!(extract_path(&d, v).is_err());
            }
        }
    }
}

proptest! {
    #[test]
    fn dijkstra_and_bellman_ford_match_enumeration(g in graph_strategy(6, (1..=10).collect())) {
        check_positive(&g);
    }

    #[test]
    fn bellman_ford_matches_enumeration_with_negative_edges(g in graph_strategy(5, vec![-2, -1, 0, 1, 2, 3])) {
        let src = n(0);
        let negative = has_reachable_negative_cycle(&g, src);
        match bellman_ford(&g, src) {
            Err(GraphError::NegativeCycleDetected) => prop_assert!(negative),
            Ok(r) => {
                prop_assert!(!negative);
                prop_assert_eq!(r.distances(), &brute_force_distances(&g, src));
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn dijkstra_rejects_any_negative_weight(g in graph_strategy(5, vec![-3, 1, 2])) {
        let has_neg = g.edges().iter().any(|e| e.weight < 0);
        let r = dijkstra(&g, n(0));
        prop_assert_eq!(has_neg, matches!(r, Err(GraphError::NegativeWeight { .. })));
    }
}

#[test]
fn complete_digraphs_small() {
    for nodes in 1..=4 {
        for seed in 0..50u64 {
            let g = complete_digraph(nodes, |a, b| ((a * 7 + b * 3 + seed as u32) % 10 + 1) as i64);
            check_positive(&g);
        }
    }
}

#[test]
fn cycle_enumeration_finds_self_loops_and_triangles() {
    let mut g = Graph::new();
    for i in 0..3 {
        g.add_node(n(i));
    }
    g.add_edge(n(0), n(0), 1).unwrap();
    g.add_edge(n(0), n(1), 1).unwrap();
    g.add_edge(n(1), n(2), 1).unwrap();
    g.add_edge(n(2), n(0), 1).unwrap();
    let mut cycles = simple_cycles(&g);
    cycles.sort();
    assert_eq!(cycles, vec![vec![n(0)], vec![n(0), n(1), n(2)]]);
}
