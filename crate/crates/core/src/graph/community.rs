//! Greedy modularity agglomeration (Clauset–Newman–Moore).

use std::collections::BTreeMap;

use super::Graph;
use crate::scalar::Scalar;

/// Disjoint community assignment with contiguous ids `0..community_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub community_of: Vec<usize>,
    pub community_count: usize,
}

impl Partition {
    /// Relabels arbitrary ids to `0..count` in order of each community's
    /// smallest node.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = BTreeMap::new();
        let community_of = labels
            .iter()
            .map(|&l| {
                let next = remap.len();
                *remap.entry(l).or_insert(next)
            })
            .collect();
        Self {
            community_of,
            community_count: remap.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            community_of: (0..n).collect(),
            community_count: n,
        }
    }

    /// Node ids per community, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count];
        for (v, &c) in self.community_of.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// `Q = Σ_c [L_c / m − (D_c / 2m)²]`; 0 for an edgeless graph.
pub fn modularity<T: Scalar>(g: &Graph, partition: &Partition) -> T {
    let m = g.edge_count();
    if m == 0 {
        return T::zero();
    }
    let mut internal = vec![0usize; partition.community_count];
    let mut degree_sum = vec![0usize; partition.community_count];
    for &(a, b) in g.edges() {
        let (ca, cb) = (partition.community_of[a], partition.community_of[b]);
        if ca == cb {
            internal[ca] += 1;
        }
    }
    for v in 0..g.node_count() {
        degree_sum[partition.community_of[v]] += g.degree(v);
    }
    let mf = T::of_usize(m);
    let two_m = T::of_usize(2 * m);
    internal
        .iter()
        .zip(&degree_sum)
        .map(|(&l, &d)| {
            let frac = T::of_usize(d) / two_m;
            T::of_usize(l) / mf - frac * frac
        })
        .sum()
}

/// Starts from singletons and repeatedly merges the adjacent pair with the
/// largest modularity gain until no merge improves modularity.
///
/// Gains are compared in exact integer arithmetic: merging communities `i`
/// and `j` changes `Q` by `(2m·E_ij − D_i·D_j) / 2m²`, where `E_ij` counts
/// edges between them and `D` are degree sums. Ties go to the smallest
/// `(i, j)` pair, where a community's id is its smallest node.
pub fn modularity_partition(g: &Graph) -> Partition {
    let n = g.node_count();
    let m = g.edge_count() as i128;
    if m == 0 {
        return Partition::singletons(n);
    }
    let mut links: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); n];
    for &(a, b) in g.edges() {
        *links[a].entry(b).or_default() += 1;
        *links[b].entry(a).or_default() += 1;
    }
    let mut degree_sum: Vec<i128> = (0..n).map(|v| g.degree(v) as i128).collect();
    let mut label: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];

    loop {
        let mut best: Option<(i128, usize, usize)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            for (&j, &e) in links[i].range(i + 1..) {
                let gain = 2 * m * e - degree_sum[i] * degree_sum[j];
                if best.is_none_or(|(b, _, _)| gain > b) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, i, j)) = best else { break };
        if gain <= 0 {
            break;
        }
        // fold j into i; i < j so the merged id stays the smaller one
        let absorbed = std::mem::take(&mut links[j]);
        for (k, e) in absorbed {
            if k == i {
                continue;
            }
            links[k].remove(&j);
            *links[k].entry(i).or_default() += e;
            *links[i].entry(k).or_default() += e;
        }
        links[i].remove(&j);
        degree_sum[i] += degree_sum[j];
        alive[j] = false;
        for l in label.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
    }
    Partition::from_labels(&label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bridged_triangles() -> Graph {
        Graph::new(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap()
    }

    /// Every set partition of `0..n` via restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                out.push(cur.clone());
                return;
            }
            for c in 0..=max + 1 {
                cur.push(c);
                rec(i + 1, n, cur, max.max(c), out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        let mut cur = vec![0];
        rec(1, n, &mut cur, 0, &mut out);
        out
    }

    #[test]
    fn bridged_triangles_split_at_bridge_and_match_exhaustive_optimum() {
        let g = bridged_triangles();
        let p = modularity_partition(&g);
        assert_eq!(p.community_count, 2);
        assert_eq!(p.community_of, vec![0, 0, 0, 1, 1, 1]);
        let best = all_partitions(6)
            .iter()
            .map(|labels| modularity::<f64>(&g, &Partition::from_labels(labels)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((modularity::<f64>(&g, &p) - best).abs() < 1e-12);
        assert_eq!(all_partitions(6).len(), 203); // Bell number B6
    }

    #[test]
    fn complete_graph_is_one_community() {
        let p = modularity_partition(&Graph::complete(4).unwrap());
        assert_eq!(p.community_count, 1);
    }

    #[test]
    fn edgeless_graph_is_all_singletons() {
        let p = modularity_partition(&Graph::new(3, []).unwrap());
        assert_eq!(p, Partition::singletons(3));
    }

    #[test]
    fn relabeling_is_contiguous_by_first_node() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.community_of, vec![0, 1, 0, 2]);
        assert_eq!(p.members(), vec![vec![0, 2], vec![1], vec![3]]);
    }

    #[test]
    fn modularity_of_known_partition() {
        // two disjoint edges, each its own community: Q = 2 * (1/2 - (2/4)^2) = 0.5
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        assert!((modularity::<f64>(&g, &p) - 0.5).abs() < 1e-15);
        assert_eq!(modularity_partition(&g), p);
    }
}
