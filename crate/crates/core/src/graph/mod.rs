//! Static undirected graph plus the structural analyses used by query
//! strategies and burden reports.

mod centrality;
mod community;
mod paths;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use centrality::{
    betweenness_centrality, closeness_centrality, clustering_coefficient, compute_centrality, degree_centrality,
    eigenvector_centrality, harmonic_centrality, load_centrality, pagerank, DEFAULT_DAMPING, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
pub use community::{modularity, modularity_partition, Partition};
pub use paths::shortest_path_distances;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge ({src}, {dst}) references node outside [0, {node_count})")]
    NodeOutOfRange { src: usize, dst: usize, node_count: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("source node {node} outside [0, {node_count})")]
    SourceOutOfRange { node: usize, node_count: usize },
    #[error("{0} requires at least two nodes")]
    TooFewNodes(CentralityMetric),
    #[error("{0} requires at least one edge")]
    NoEdges(CentralityMetric),
    #[error("{metric} did not converge within {iterations} iterations")]
    NotConverged {
        metric: CentralityMetric,
        iterations: usize,
        last: Vec<f64>,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Undirected simple graph with a fixed node set `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Repeated pairs (in either
    /// orientation) collapse into one edge.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(GraphError::NodeOutOfRange {
                    src: a,
                    dst: b,
                    node_count,
                });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            node_count,
            edges,
            adjacency,
        })
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|b| (b - 1, b)))
    }

    /// Node 0 is the center.
    pub fn star(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|b| (0, b)))
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        Self::new(self.node_count, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }
}

/// The eight structural centralities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CentralityMetric {
    Degree,
    Betweenness,
    Closeness,
    Eigenvector,
    Harmonic,
    Load,
    Pagerank,
    ClusteringCoefficient,
}

impl CentralityMetric {
    pub const ALL: [CentralityMetric; 8] = [
        CentralityMetric::Degree,
        CentralityMetric::Betweenness,
        CentralityMetric::Closeness,
        CentralityMetric::Eigenvector,
        CentralityMetric::Harmonic,
        CentralityMetric::Load,
        CentralityMetric::Pagerank,
        CentralityMetric::ClusteringCoefficient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CentralityMetric::Degree => "degree",
            CentralityMetric::Betweenness => "betweenness",
            CentralityMetric::Closeness => "closeness",
            CentralityMetric::Eigenvector => "eigenvector",
            CentralityMetric::Harmonic => "harmonic",
            CentralityMetric::Load => "load",
            CentralityMetric::Pagerank => "pagerank",
            CentralityMetric::ClusteringCoefficient => "clustering_coefficient",
        }
    }
}

impl fmt::Display for CentralityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CentralityMetric {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GraphError::InvalidParameter(format!("unknown centrality '{s}'")))
    }
}

/// Per-node centrality values tagged with the metric that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector<T> {
    pub metric: CentralityMetric,
    pub values: Vec<T>,
}
