use proptest::prelude::*;
use streamal::graph::{compute_centrality, modularity, modularity_partition, CentralityMetric, Graph, Partition};

const ALL: [CentralityMetric; 8] = [
    CentralityMetric::Degree,
    CentralityMetric::Betweenness,
    CentralityMetric::Closeness,
    CentralityMetric::Eigenvector,
    CentralityMetric::Harmonic,
    CentralityMetric::Load,
    CentralityMetric::Pagerank,
    CentralityMetric::ClusteringCoefficient,
];

/// Connected graph: a random spanning tree plus random extra edges.
fn connected_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
        (parents, proptest::collection::vec(any::<bool>(), n * (n - 1) / 2)).prop_map(move |(parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
            let mut e = extra.iter();
            for a in 0..n {
                for b in a + 1..n {
                    if *e.next().unwrap() {
                        edges.push((a, b));
                    }
                }
            }
            Graph::new(n, edges).unwrap()
        })
    })
}

fn with_permutation(max_n: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    connected_graph(max_n).prop_flat_map(|g| {
        let n = g.node_count();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centralities_are_relabeling_equivariant((g, perm) in with_permutation(8)) {
        let h = g.permuted(&perm).unwrap();
        for metric in ALL {
            let a = compute_centrality::<f64>(&g, metric).unwrap().values;
            let b = compute_centrality::<f64>(&h, metric).unwrap().values;
            prop_assert_eq!(a.len(), g.node_count());
            for v in 0..g.node_count() {
                prop_assert!(a[v].is_finite());
                prop_assert!((a[v] - b[perm[v]]).abs() < 1e-7, "{} at node {}: {} vs {}", metric, v, a[v], b[perm[v]]);
            }
        }
    }

    #[test]
    fn normalizations_hold(g in connected_graph(12)) {
        let pr = compute_centrality::<f64>(&g, CentralityMetric::Pagerank).unwrap().values;
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let ev = compute_centrality::<f64>(&g, CentralityMetric::Eigenvector).unwrap().values;
        prop_assert!((ev.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
        for metric in [CentralityMetric::Degree, CentralityMetric::ClusteringCoefficient] {
            let v = compute_centrality::<f64>(&g, metric).unwrap().values;
            prop_assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn greedy_partition_beats_singletons(g in connected_graph(14)) {
        let part = modularity_partition(&g);
        let n = g.node_count();
        let mut seen = vec![false; part.community_count];
        for &c in &part.community_of {
            prop_assert!(c < part.community_count);
            seen[c] = true;
        }
        prop_assert!(seen.into_iter().all(|s| s));
        prop_assert_eq!(part.community_of.len(), n);
        let singletons = Partition { community_of: (0..n).collect(), community_count: n };
        let q: f64 = modularity(&g, &part);
        let q0: f64 = modularity(&g, &singletons);
        prop_assert!(q >= q0 - 1e-12);
    }
}

#[test]
fn complete_graphs_have_no_brokers() {
    for n in 1..=9 {
        let g = Graph::complete(n).unwrap();
        for metric in [CentralityMetric::Betweenness, CentralityMetric::Load] {
            let v = compute_centrality::<f64>(&g, metric).unwrap().values;
            assert!(v.iter().all(|&x| x == 0.0), "{metric} on K{n}: {v:?}");
        }
    }
}
