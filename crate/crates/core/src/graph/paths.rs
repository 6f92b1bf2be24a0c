use std::collections::VecDeque;

use super::{Graph, GraphError};
use crate::scalar::Scalar;

/// Unweighted hop distances from `source`; `None` marks unreachable nodes.
pub fn shortest_path_distances(g: &Graph, source: usize) -> Result<Vec<Option<usize>>, GraphError> {
    if source >= g.node_count() {
        return Err(GraphError::SourceOutOfRange {
            node: source,
            node_count: g.node_count(),
        });
    }
    Ok(bfs_distances(g, source))
}

pub(crate) fn bfs_distances(g: &Graph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap_or(0);
        for &w in g.neighbors(v) {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Single-source shortest-path DAG: BFS visit order, path counts, and
/// predecessor lists.
pub(crate) struct PathDag<T> {
    pub order: Vec<usize>,
    pub sigma: Vec<T>,
    pub preds: Vec<Vec<usize>>,
}

pub(crate) fn path_dag<T: Scalar>(g: &Graph, source: usize) -> PathDag<T> {
    let n = g.node_count();
    let mut dist: Vec<Option<usize>> = vec![None; n];
    let mut sigma = vec![T::zero(); n];
    let mut preds = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    dist[source] = Some(0);
    sigma[source] = T::one();
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        let dv = dist[v].unwrap_or(0);
        for &w in g.neighbors(v) {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
            if dist[w] == Some(dv + 1) {
                let sv = sigma[v];
                sigma[w] += sv;
                preds[w].push(v);
            }
        }
    }
    PathDag { order, sigma, preds }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_distances() {
        let g = Graph::path(3).unwrap();
        assert_eq!(shortest_path_distances(&g, 0).unwrap(), vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn disconnected_node_is_unreachable() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        assert_eq!(shortest_path_distances(&g, 0).unwrap()[2], None);
    }

    #[test]
    fn source_out_of_range() {
        let g = Graph::path(3).unwrap();
        assert!(shortest_path_distances(&g, 3).is_err());
    }

    #[test]
    fn sigma_counts_paths_in_square() {
        // 0-1-3 and 0-2-3
        let g = Graph::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let dag = path_dag::<f64>(&g, 0);
        assert_eq!(dag.sigma, vec![1.0, 1.0, 1.0, 2.0]);
        assert_eq!(dag.preds[3], vec![1, 2]);
    }

    /// Exhaustive DFS over simple paths: the shortest simple path length is the
    /// hop distance.
    fn dfs_oracle(g: &Graph, s: usize) -> Vec<Option<usize>> {
        fn walk(g: &Graph, v: usize, len: usize, seen: &mut Vec<bool>, best: &mut Vec<Option<usize>>) {
            if best[v].map_or(true, |b| len < b) {
                best[v] = Some(len);
            }
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    walk(g, w, len + 1, seen, best);
                    seen[w] = false;
                }
            }
        }
        let mut best = vec![None; g.node_count()];
        let mut seen = vec![false; g.node_count()];
        seen[s] = true;
        walk(g, s, 0, &mut seen, &mut best);
        best
    }

    #[test]
    fn bfs_matches_exhaustive_search_on_random_12_node_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let mut edges = Vec::new();
            for a in 0..12 {
                for b in a + 1..12 {
                    if rng.random::<f64>() < 0.25 {
                        edges.push((a, b));
                    }
                }
            }
            let g = Graph::new(12, edges).unwrap();
            for s in 0..12 {
                assert_eq!(shortest_path_distances(&g, s).unwrap(), dfs_oracle(&g, s));
            }
        }
    }
}
