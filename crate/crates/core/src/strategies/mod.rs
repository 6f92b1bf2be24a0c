//! Daily query strategies behind one selection contract.
//!
//! Every strategy returns exactly `k` distinct pool nodes except `no_al`,
//! which returns nothing. Ties are broken toward the smaller node id.

mod cluster;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cluster::{
    covering_radius, kcenter_greedy, kmeans, kmedoids, medoid_cost, KMeans, EXHAUSTIVE_MEDOID_SUBSETS, KMEANS_RESTARTS,
};
pub use select::{
    percentile_ranks, percentile_ranks_within, select_age, select_coreset, select_degree, select_density,
    select_featprop, select_graphpart, select_graphpartfar, select_no_al, select_pagerank, select_random,
    select_uncertainty, UncertaintyVariant, PAGERANK_TIE_TOLERANCE,
};

use crate::burden::QueryLog;
use crate::graph::{Graph, GraphError};
use crate::linalg::{Matrix, ShapeError};
use crate::model::NormalizedAdjacency;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("invalid selection context: {0}")]
    InvalidContext(String),
    #[error("probability row of node {0} contains NaN")]
    NanProbability(usize),
    #[error("AGE weights must be nonnegative and sum to 1, got ({0}, {1}, {2})")]
    InvalidWeights(f64, f64, f64),
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Everything a strategy may look at when choosing the day's queries.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a, T> {
    pub graph: &'a Graph,
    pub adj: &'a NormalizedAdjacency<T>,
    /// `node_count × dim`; raw day features for `featprop`
    pub embeddings: &'a Matrix<T>,
    /// `node_count × 2`
    pub probabilities: &'a Matrix<T>,
    /// ascending, distinct
    pub pool: &'a [usize],
    pub history: &'a QueryLog,
    pub k: usize,
    pub rng_seed: u64,
}

impl<T: Scalar> SelectionContext<'_, T> {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let n = self.graph.node_count();
        let fail = |m: String| Err(StrategyError::InvalidContext(m));
        if self.pool.windows(2).any(|w| w[0] >= w[1]) {
            return fail("pool must be ascending without duplicates".into());
        }
        if let Some(&v) = self.pool.last() {
            if v >= n {
                return fail(format!("pool node {v} outside [0, {n})"));
            }
        }
        if self.k == 0 || self.k > self.pool.len() {
            return fail(format!("k = {} must lie in [1, pool size {}]", self.k, self.pool.len()));
        }
        if self.embeddings.rows() != n {
            return fail(format!("embeddings have {} rows for {n} nodes", self.embeddings.rows()));
        }
        if self.probabilities.shape() != (n, 2) {
            return fail(format!(
                "probabilities are {}x{}, expected {n}x2",
                self.probabilities.rows(),
                self.probabilities.cols()
            ));
        }
        if self.adj.node_count() != n {
            return fail(format!("adjacency has {} nodes, graph {n}", self.adj.node_count()));
        }
        Ok(())
    }

    /// Pool rows of the embedding matrix, in pool order.
    pub(crate) fn pool_embeddings(&self) -> Matrix<T> {
        self.embeddings.select_rows(self.pool)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    /// chosen node ids in pick order
    pub chosen: Vec<usize>,
    /// per pool node, aligned with the context's pool, for score-ranked
    /// strategies
    pub scores: Option<Vec<T>>,
}

impl<T> Selection<T> {
    pub fn empty() -> Self {
        Self {
            chosen: Vec::new(),
            scores: None,
        }
    }
}

/// Mixing weights of the AGE score: uncertainty, density, centrality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgeWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for AgeWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
        }
    }
}

impl AgeWeights {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let w = [self.alpha, self.beta, self.gamma];
        let ok = w.iter().all(|v| v.is_finite() && *v >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(StrategyError::InvalidWeights(self.alpha, self.beta, self.gamma))
        }
    }
}

/// Tunables shared by the clustering-based strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyOptions {
    pub age_weights: AgeWeights,
    pub kmeans_max_iter: usize,
    pub kmedoids_max_iter: usize,
}

impl Default for StrategyOptions {
    fn default() -> Self {
        Self {
            age_weights: AgeWeights::default(),
            kmeans_max_iter: 100,
            kmedoids_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NoAl,
    Random,
    UncertaintyEntropy,
    UncertaintyLeastConfidence,
    UncertaintyMargin,
    Degree,
    Pagerank,
    Density,
    Coreset,
    Featprop,
    Graphpart,
    Graphpartfar,
    Age,
}

impl Strategy {
    pub const ALL: [Strategy; 13] = [
        Self::NoAl,
        Self::Random,
        Self::UncertaintyEntropy,
        Self::UncertaintyLeastConfidence,
        Self::UncertaintyMargin,
        Self::Degree,
        Self::Pagerank,
        Self::Density,
        Self::Coreset,
        Self::Featprop,
        Self::Graphpart,
        Self::Graphpartfar,
        Self::Age,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NoAl => "no_al",
            Self::Random => "random",
            Self::UncertaintyEntropy => "uncertainty_entropy",
            Self::UncertaintyLeastConfidence => "uncertainty_least_confidence",
            Self::UncertaintyMargin => "uncertainty_margin",
            Self::Degree => "degree",
            Self::Pagerank => "pagerank",
            Self::Density => "density",
            Self::Coreset => "coreset",
            Self::Featprop => "featprop",
            Self::Graphpart => "graphpart",
            Self::Graphpartfar => "graphpartfar",
            Self::Age => "age",
        }
    }

    /// `featprop` clusters propagated raw features, so the harness hands
    /// it day features instead of model embeddings.
    pub fn wants_raw_features(self) -> bool {
        self == Self::Featprop
    }

    /// The strategies grouped as graph-based in trend comparisons.
    pub fn is_graph_based(self) -> bool {
        matches!(self, Self::Graphpart | Self::Graphpartfar | Self::Density | Self::Age)
    }

    pub fn select<T: Scalar>(
        self,
        ctx: &SelectionContext<'_, T>,
        options: &StrategyOptions,
    ) -> Result<Selection<T>, StrategyError> {
        if self != Self::NoAl {
            ctx.validate()?;
        }
        match self {
            Self::NoAl => Ok(select_no_al(ctx)),
            Self::Random => select_random(ctx),
            Self::UncertaintyEntropy => select_uncertainty(ctx, UncertaintyVariant::Entropy),
            Self::UncertaintyLeastConfidence => select_uncertainty(ctx, UncertaintyVariant::LeastConfidence),
            Self::UncertaintyMargin => select_uncertainty(ctx, UncertaintyVariant::Margin),
            Self::Degree => select_degree(ctx),
            Self::Pagerank => select_pagerank(ctx),
            Self::Density => select_density(ctx, options.kmeans_max_iter),
            Self::Coreset => select_coreset(ctx),
            Self::Featprop => select_featprop(ctx, options.kmeans_max_iter),
            Self::Graphpart => select_graphpart(ctx, options.kmedoids_max_iter),
            Self::Graphpartfar => select_graphpartfar(ctx, options.kmedoids_max_iter),
            Self::Age => select_age(ctx, &options.age_weights, options.kmeans_max_iter),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_owned()))
    }
}
