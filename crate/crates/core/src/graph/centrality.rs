use super::paths::{bfs_distances, path_dag};
use super::{CentralityMetric, CentralityVector, Graph, GraphError};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_DAMPING: f64 = 0.85;

fn vector<T>(metric: CentralityMetric, values: Vec<T>) -> CentralityVector<T> {
    CentralityVector { metric, values }
}

/// Dispatches to the named centrality with default iteration settings.
pub fn compute_centrality<T: Scalar>(g: &Graph, metric: CentralityMetric) -> Result<CentralityVector<T>, GraphError> {
    let tol = T::lit(DEFAULT_TOL);
    match metric {
        CentralityMetric::Degree => degree_centrality(g),
        CentralityMetric::Betweenness => Ok(betweenness_centrality(g)),
        CentralityMetric::Closeness => Ok(closeness_centrality(g)),
        CentralityMetric::Eigenvector => eigenvector_centrality(g, DEFAULT_MAX_ITER, tol),
        CentralityMetric::Harmonic => Ok(harmonic_centrality(g)),
        CentralityMetric::Load => Ok(load_centrality(g)),
        CentralityMetric::Pagerank => pagerank(g, T::lit(DEFAULT_DAMPING), DEFAULT_MAX_ITER, tol),
        CentralityMetric::ClusteringCoefficient => Ok(clustering_coefficient(g)),
    }
}

/// `deg(v) / (N - 1)`.
pub fn degree_centrality<T: Scalar>(g: &Graph) -> Result<CentralityVector<T>, GraphError> {
    let n = g.node_count();
    if n < 2 {
        return Err(GraphError::TooFewNodes(CentralityMetric::Degree));
    }
    let denom = T::of_usize(n - 1);
    let values = (0..n).map(|v| T::of_usize(g.degree(v)) / denom).collect();
    Ok(vector(CentralityMetric::Degree, values))
}

/// Brandes accumulation over unordered pairs (unnormalized).
pub fn betweenness_centrality<T: Scalar>(g: &Graph) -> CentralityVector<T> {
    let n = g.node_count();
    let mut bc = vec![T::zero(); n];
    let mut delta = vec![T::zero(); n];
    for s in 0..n {
        let dag = path_dag::<T>(g, s);
        delta.iter_mut().for_each(|d| *d = T::zero());
        for &w in dag.order.iter().rev() {
            let coeff = (T::one() + delta[w]) / dag.sigma[w];
            for &v in &dag.preds[w] {
                delta[v] += dag.sigma[v] * coeff;
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    // every unordered pair was visited from both endpoints
    let half = T::lit(0.5);
    vector(
        CentralityMetric::Betweenness,
        bc.into_iter().map(|b| b * half).collect(),
    )
}

/// Reciprocal of the summed distance to every reachable node; 0 when nothing
/// is reachable.
pub fn closeness_centrality<T: Scalar>(g: &Graph) -> CentralityVector<T> {
    let values = (0..g.node_count())
        .map(|v| {
            let total: usize = bfs_distances(g, v).into_iter().flatten().sum();
            if total == 0 {
                T::zero()
            } else {
                T::one() / T::of_usize(total)
            }
        })
        .collect();
    vector(CentralityMetric::Closeness, values)
}

/// Power iteration with L2 normalization.
///
/// Iterates `x ← (A + I)x` rather than `x ← Ax`: both share eigenvectors, but
/// the shifted operator has a strictly dominant eigenvalue on bipartite
/// graphs (paths, stars), where the plain iteration oscillates.
pub fn eigenvector_centrality<T: Scalar>(
    g: &Graph,
    max_iter: usize,
    tol: T,
) -> Result<CentralityVector<T>, GraphError> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Err(GraphError::NoEdges(CentralityMetric::Eigenvector));
    }
    let mut x = vec![T::one() / T::of_usize(n).sqrt(); n];
    let mut next = vec![T::zero(); n];
    for _ in 0..max_iter {
        for v in 0..n {
            next[v] = x[v] + g.neighbors(v).iter().map(|&u| x[u]).sum::<T>();
        }
        let norm = next.iter().map(|&y| y * y).sum::<T>().sqrt();
        let mut change = T::zero();
        for v in 0..n {
            let y = next[v] / norm;
            change = change.max((y - x[v]).abs());
            x[v] = y;
        }
        if change < tol {
            return Ok(vector(CentralityMetric::Eigenvector, x));
        }
    }
    Err(GraphError::NotConverged {
        metric: CentralityMetric::Eigenvector,
        iterations: max_iter,
        last: x.iter().map(|v| v.as_f64()).collect(),
    })
}

/// Sum of reciprocal hop distances to every reachable node.
pub fn harmonic_centrality<T: Scalar>(g: &Graph) -> CentralityVector<T> {
    let values = (0..g.node_count())
        .map(|v| {
            bfs_distances(g, v)
                .into_iter()
                .flatten()
                .filter(|&d| d > 0)
                .map(|d| T::one() / T::of_usize(d))
                .sum()
        })
        .collect();
    vector(CentralityMetric::Harmonic, values)
}

/// Shortest paths through `v` (over unordered pairs not involving `v`)
/// divided by the total number of shortest paths over all unordered pairs.
///
/// Each distinct shortest path counts once. For a source `s`, the paths
/// through `v` are `σ(s,v)` prefixes times the number of DAG continuations
/// leaving `v`, accumulated leaf-to-root.
pub fn load_centrality<T: Scalar>(g: &Graph) -> CentralityVector<T> {
    let n = g.node_count();
    let mut through = vec![T::zero(); n];
    let mut total = T::zero();
    let mut continuations = vec![T::zero(); n];
    for s in 0..n {
        let dag = path_dag::<T>(g, s);
        continuations.iter_mut().for_each(|c| *c = T::zero());
        for &w in dag.order.iter().rev() {
            let carried = T::one() + continuations[w];
            for &v in &dag.preds[w] {
                continuations[v] += carried;
            }
            if w != s {
                through[w] += dag.sigma[w] * continuations[w];
                total += dag.sigma[w];
            }
        }
    }
    let values = if total == T::zero() {
        vec![T::zero(); n]
    } else {
        // numerator and denominator both double-count unordered pairs
        through.into_iter().map(|t| t / total).collect()
    };
    vector(CentralityMetric::Load, values)
}

/// Fixed-point iteration from the uniform vector. Undirected edges are
/// links in both directions; degree-0 nodes spread their mass uniformly.
pub fn pagerank<T: Scalar>(g: &Graph, damping: T, max_iter: usize, tol: T) -> Result<CentralityVector<T>, GraphError> {
    if !(damping > T::zero() && damping < T::one()) {
        return Err(GraphError::InvalidParameter(format!(
            "damping must lie in (0, 1), got {damping}"
        )));
    }
    let n = g.node_count();
    let nf = T::of_usize(n);
    let teleport = (T::one() - damping) / nf;
    let mut x = vec![T::one() / nf; n];
    let mut next = vec![T::zero(); n];
    for _ in 0..max_iter {
        let dangling: T = (0..n).filter(|&v| g.degree(v) == 0).map(|v| x[v]).sum();
        let spread = dangling / nf;
        for v in 0..n {
            let inflow: T = g.neighbors(v).iter().map(|&u| x[u] / T::of_usize(g.degree(u))).sum();
            next[v] = teleport + damping * (inflow + spread);
        }
        let change = x.iter().zip(&next).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        std::mem::swap(&mut x, &mut next);
        if change < tol {
            return Ok(vector(CentralityMetric::Pagerank, x));
        }
    }
    Err(GraphError::NotConverged {
        metric: CentralityMetric::Pagerank,
        iterations: max_iter,
        last: x.iter().map(|v| v.as_f64()).collect(),
    })
}

/// `2T(v) / (deg(v)(deg(v) - 1))`, 0 for degree below 2.
pub fn clustering_coefficient<T: Scalar>(g: &Graph) -> CentralityVector<T> {
    let values = (0..g.node_count())
        .map(|v| {
            let nbrs = g.neighbors(v);
            let d = nbrs.len();
            if d < 2 {
                return T::zero();
            }
            let mut triangles = 0usize;
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    if g.has_edge(a, b) {
                        triangles += 1;
                    }
                }
            }
            T::of_usize(2 * triangles) / T::of_usize(d * (d - 1))
        })
        .collect();
    vector(CentralityMetric::ClusteringCoefficient, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangle() -> Graph {
        Graph::complete(3).unwrap()
    }

    #[test]
    fn degree_examples() {
        let star = degree_centrality::<f64>(&Graph::star(4).unwrap()).unwrap();
        assert_eq!(star.values, vec![1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let path = degree_centrality::<f64>(&Graph::path(3).unwrap()).unwrap();
        assert_eq!(path.values, vec![0.5, 1.0, 0.5]);
        assert_eq!(
            degree_centrality::<f64>(&Graph::new(1, []).unwrap()),
            Err(GraphError::TooFewNodes(CentralityMetric::Degree))
        );
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(
            betweenness_centrality::<f64>(&Graph::path(3).unwrap()).values,
            vec![0.0, 1.0, 0.0]
        );
        assert_eq!(betweenness_centrality::<f64>(&triangle()).values, vec![0.0; 3]);
    }

    #[test]
    fn closeness_examples() {
        let c = closeness_centrality::<f64>(&Graph::path(3).unwrap()).values;
        assert_eq!(c, vec![1.0 / 3.0, 0.5, 1.0 / 3.0]);
        let k4 = closeness_centrality::<f64>(&Graph::complete(4).unwrap()).values;
        assert!(k4.iter().all(|&v| v == 1.0 / 3.0));
        let iso = closeness_centrality::<f64>(&Graph::new(3, [(0, 1)]).unwrap()).values;
        assert_eq!(iso, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn eigenvector_examples() {
        let k3 = eigenvector_centrality::<f64>(&triangle(), DEFAULT_MAX_ITER, 1e-9).unwrap();
        for v in k3.values {
            assert_abs_diff_eq!(v, 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        }
        let star = eigenvector_centrality::<f64>(&Graph::star(5).unwrap(), DEFAULT_MAX_ITER, 1e-9)
            .unwrap()
            .values;
        assert!(star[1..].iter().all(|&leaf| star[0] > leaf));
        let norm: f64 = star.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn eigenvector_errors() {
        assert_eq!(
            eigenvector_centrality::<f64>(&Graph::new(3, []).unwrap(), 10, 1e-9),
            Err(GraphError::NoEdges(CentralityMetric::Eigenvector))
        );
        match eigenvector_centrality::<f64>(&Graph::path(6).unwrap(), 2, 1e-15) {
            Err(GraphError::NotConverged { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.len(), 6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn harmonic_examples() {
        let h = harmonic_centrality::<f64>(&Graph::path(3).unwrap()).values;
        assert_eq!(h, vec![1.5, 2.0, 1.5]);
        let iso = harmonic_centrality::<f64>(&Graph::new(2, []).unwrap()).values;
        assert_eq!(iso, vec![0.0, 0.0]);
    }

    #[test]
    fn load_examples() {
        let l = load_centrality::<f64>(&Graph::path(3).unwrap()).values;
        assert_eq!(l, vec![0.0, 1.0 / 3.0, 0.0]);
        assert_eq!(load_centrality::<f64>(&triangle()).values, vec![0.0; 3]);
        assert_eq!(load_centrality::<f64>(&Graph::new(2, []).unwrap()).values, vec![0.0; 2]);
    }

    #[test]
    fn load_counts_each_shortest_path() {
        // square 0-1-3-2-0: pairs (0,3) and (1,2) each have two shortest paths
        let g = Graph::new(4, [(0, 1), (1, 3), (3, 2), (2, 0)]).unwrap();
        let l = load_centrality::<f64>(&g).values;
        // 4 adjacent pairs (1 path each) + 2 diagonal pairs (2 paths each) = 8
        // node 0 lies on one path of pair (1,2)
        assert!(l.iter().all(|&v| (v - 1.0 / 8.0).abs() < 1e-15));
    }

    #[test]
    fn pagerank_examples() {
        let k3 = pagerank::<f64>(&triangle(), 0.85, DEFAULT_MAX_ITER, 1e-12).unwrap();
        for v in k3.values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
        let star = pagerank::<f64>(&Graph::star(5).unwrap(), 0.85, DEFAULT_MAX_ITER, 1e-12)
            .unwrap()
            .values;
        assert!(star[1..].iter().all(|&leaf| star[0] > leaf));
        assert!(pagerank::<f64>(&triangle(), 1.0, 10, 1e-9).is_err());
        assert!(pagerank::<f64>(&triangle(), 0.0, 10, 1e-9).is_err());
    }

    #[test]
    fn pagerank_dangling_matches_long_reference_iteration() {
        // isolated node 2 plus edge 0-1
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let d = 0.85;
        let pr = pagerank::<f64>(&g, d, DEFAULT_MAX_ITER, 1e-14).unwrap().values;
        // reference: plain loop of the update rule far past convergence
        let mut x = [1.0 / 3.0; 3];
        for _ in 0..400 {
            let spread = x[2] / 3.0;
            x = [
                (1.0 - d) / 3.0 + d * (x[1] + spread),
                (1.0 - d) / 3.0 + d * (x[0] + spread),
                (1.0 - d) / 3.0 + d * spread,
            ];
        }
        for (a, b) in pr.iter().zip(x) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pr.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(clustering_coefficient::<f64>(&triangle()).values, vec![1.0; 3]);
        assert_eq!(
            clustering_coefficient::<f64>(&Graph::star(5).unwrap()).values,
            vec![0.0; 5]
        );
    }

    #[test]
    fn f32_instantiation() {
        let h = harmonic_centrality::<f32>(&Graph::path(3).unwrap()).values;
        assert_eq!(h, vec![1.5_f32, 2.0, 1.5]);
        let pr = pagerank::<f32>(&triangle(), 0.85, 100, 1e-6).unwrap();
        assert!((pr.values.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }
}
