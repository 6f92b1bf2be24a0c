use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cluster::{kcenter_greedy, kmeans, kmedoids};
use super::{AgeWeights, Selection, SelectionContext, StrategyError};
use crate::graph::{compute_centrality, modularity_partition, CentralityMetric};
use crate::linalg::{distance, squared_distance, Matrix};
use crate::scalar::{average_ranks_within, cmp_scalar, Scalar};

/// Pool nodes with the `k` largest scores; ties go to the smaller id.
fn top_k<T: Scalar>(pool: &[usize], scores: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| cmp_scalar(scores[b], scores[a]).then(pool[a].cmp(&pool[b])));
    order.into_iter().take(k).map(|i| pool[i]).collect()
}

fn ranked<T: Scalar>(ctx: &SelectionContext<'_, T>, scores: Vec<T>) -> Selection<T> {
    Selection {
        chosen: top_k(ctx.pool, &scores, ctx.k),
        scores: Some(scores),
    }
}

pub fn select_no_al<T>(_ctx: &SelectionContext<'_, T>) -> Selection<T> {
    Selection::empty()
}

/// Uniform sample of `k` pool nodes without replacement.
pub fn select_random<T: Scalar>(ctx: &SelectionContext<'_, T>) -> Result<Selection<T>, StrategyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.rng_seed);
    let chosen = index::sample(&mut rng, ctx.pool.len(), ctx.k)
        .into_iter()
        .map(|i| ctx.pool[i])
        .collect();
    Ok(Selection { chosen, scores: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyVariant {
    Entropy,
    LeastConfidence,
    Margin,
}

impl UncertaintyVariant {
    pub fn score<T: Scalar>(self, row: &[T]) -> T {
        match self {
            Self::Entropy => entropy(row),
            Self::LeastConfidence => T::one() - row.iter().copied().fold(T::neg_infinity(), T::max),
            Self::Margin => {
                let mut sorted = row.to_vec();
                sorted.sort_by(|a, b| cmp_scalar(*b, *a));
                -(sorted[0] - sorted[1])
            }
        }
    }
}

/// Natural-log entropy with `0 ln 0 = 0`.
pub(crate) fn entropy<T: Scalar>(row: &[T]) -> T {
    -row.iter().filter(|&&p| p > T::zero()).map(|&p| p * p.ln()).sum::<T>()
}

fn pool_probability_scores<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    f: impl Fn(&[T]) -> T,
) -> Result<Vec<T>, StrategyError> {
    ctx.pool
        .iter()
        .map(|&v| {
            let row = ctx.probabilities.row(v);
            if row.iter().any(|p| p.is_nan()) {
                Err(StrategyError::NanProbability(v))
            } else {
                Ok(f(row))
            }
        })
        .collect()
}

pub fn select_uncertainty<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    variant: UncertaintyVariant,
) -> Result<Selection<T>, StrategyError> {
    let scores = pool_probability_scores(ctx, |row| variant.score(row))?;
    Ok(ranked(ctx, scores))
}

pub fn select_degree<T: Scalar>(ctx: &SelectionContext<'_, T>) -> Result<Selection<T>, StrategyError> {
    let scores = ctx.pool.iter().map(|&v| T::of_usize(ctx.graph.degree(v))).collect();
    Ok(ranked(ctx, scores))
}

fn pool_pagerank<T: Scalar>(ctx: &SelectionContext<'_, T>) -> Result<Vec<T>, StrategyError> {
    let pr = compute_centrality::<T>(ctx.graph, CentralityMetric::Pagerank)?;
    Ok(ctx.pool.iter().map(|&v| pr.values[v]).collect())
}

pub fn select_pagerank<T: Scalar>(ctx: &SelectionContext<'_, T>) -> Result<Selection<T>, StrategyError> {
    let scores = pool_pagerank(ctx)?;
    Ok(ranked(ctx, scores))
}

/// For each centroid in order, the nearest pool row not yet taken.
fn nearest_per_centroid<T: Scalar>(rows: &Matrix<T>, centroids: &Matrix<T>, pool: &[usize]) -> Vec<usize> {
    let mut taken = vec![false; rows.rows()];
    let mut out = Vec::with_capacity(centroids.rows());
    for c in 0..centroids.rows() {
        let mut best: Option<(usize, T)> = None;
        for i in (0..rows.rows()).filter(|&i| !taken[i]) {
            let d = squared_distance(rows.row(i), centroids.row(c));
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("k <= pool size");
        taken[i] = true;
        out.push(pool[i]);
    }
    out
}

fn cluster_representatives<T: Scalar>(
    rows: &Matrix<T>,
    ctx: &SelectionContext<'_, T>,
    max_iter: usize,
) -> Result<Selection<T>, StrategyError> {
    let km = kmeans(rows, ctx.k, ctx.rng_seed, max_iter)?;
    Ok(Selection {
        chosen: nearest_per_centroid(rows, &km.centroids, ctx.pool),
        scores: None,
    })
}

/// k-means over pool embeddings, then the pool node nearest each centroid.
pub fn select_density<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    max_iter: usize,
) -> Result<Selection<T>, StrategyError> {
    cluster_representatives(&ctx.pool_embeddings(), ctx, max_iter)
}

/// As [`select_density`] over raw features propagated two hops, `Â(ÂX)`.
pub fn select_featprop<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    max_iter: usize,
) -> Result<Selection<T>, StrategyError> {
    let propagated = ctx.adj.propagate(&ctx.adj.propagate(ctx.embeddings)?)?;
    cluster_representatives(&propagated.select_rows(ctx.pool), ctx, max_iter)
}

/// Farthest-first traversal over pool embeddings, seeded with every node
/// already in the query history.
pub fn select_coreset<T: Scalar>(ctx: &SelectionContext<'_, T>) -> Result<Selection<T>, StrategyError> {
    let preselected: Vec<usize> = ctx
        .history
        .queried_nodes()
        .into_iter()
        .filter_map(|v| ctx.pool.binary_search(&v).ok())
        .collect();
    let picks = kcenter_greedy(&ctx.pool_embeddings(), ctx.k, &preselected)?;
    Ok(Selection {
        chosen: picks.into_iter().map(|i| ctx.pool[i]).collect(),
        scores: None,
    })
}

/// Pool members per modularity community with the share of `k` each gets
/// by largest remainder (ties to the smaller community id).
fn community_budgets<T: Scalar>(ctx: &SelectionContext<'_, T>) -> Vec<(Vec<usize>, usize)> {
    let partition = modularity_partition(ctx.graph);
    let mut members = vec![Vec::new(); partition.community_count];
    for (pos, &v) in ctx.pool.iter().enumerate() {
        members[partition.community_of[v]].push(pos);
    }
    let total = ctx.pool.len();
    let mut budgets: Vec<usize> = members.iter().map(|m| ctx.k * m.len() / total).collect();
    let leftover = ctx.k - budgets.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..members.len()).collect();
    by_remainder.sort_by_key(|&c| (std::cmp::Reverse(ctx.k * members[c].len() % total), c));
    for &c in by_remainder.iter().take(leftover) {
        budgets[c] += 1;
    }
    members.into_iter().zip(budgets).collect()
}

fn community_medoids<T: Scalar>(
    emb: &Matrix<T>,
    positions: &[usize],
    budget: usize,
    max_iter: usize,
) -> Result<Vec<usize>, StrategyError> {
    if budget == 0 {
        return Ok(Vec::new());
    }
    let local = kmedoids(&emb.select_rows(positions), budget, max_iter)?;
    Ok(local.into_iter().map(|i| positions[i]).collect())
}

/// Medoids of each modularity community's pool nodes, with the budget split
/// in proportion to community pool size.
pub fn select_graphpart<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    max_iter: usize,
) -> Result<Selection<T>, StrategyError> {
    let emb = ctx.pool_embeddings();
    let mut chosen = Vec::with_capacity(ctx.k);
    for (positions, budget) in community_budgets(ctx) {
        for pos in community_medoids(&emb, &positions, budget, max_iter)? {
            chosen.push(ctx.pool[pos]);
        }
    }
    Ok(Selection { chosen, scores: None })
}

/// Half the median pairwise distance between pool embeddings.
pub(crate) fn diversity_radius<T: Scalar>(emb: &Matrix<T>) -> T {
    let n = emb.rows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(distance(emb.row(i), emb.row(j)));
        }
    }
    if d.is_empty() {
        return T::zero();
    }
    d.sort_by(|a, b| cmp_scalar(*a, *b));
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        (d[m / 2 - 1] + d[m / 2]) / T::lit(2.0)
    };
    median / T::lit(2.0)
}

/// GraphPart with a diversity penalty: a medoid closer than the diversity
/// radius to any node already selected (now or in history) is replaced by
/// the community's pool node farthest from the selected set; if even that
/// node is too close, the medoid is kept.
pub fn select_graphpartfar<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    max_iter: usize,
) -> Result<Selection<T>, StrategyError> {
    let emb = ctx.pool_embeddings();
    let delta = diversity_radius(&emb);
    let mut anchors: Vec<usize> = ctx.history.queried_nodes();
    let gap_to_anchors = |v: usize, anchors: &[usize]| {
        anchors
            .iter()
            .map(|&a| distance(ctx.embeddings.row(v), ctx.embeddings.row(a)))
            .fold(T::infinity(), T::min)
    };
    let mut chosen: Vec<usize> = Vec::with_capacity(ctx.k);
    for (positions, budget) in community_budgets(ctx) {
        for pos in community_medoids(&emb, &positions, budget, max_iter)? {
            let medoid = ctx.pool[pos];
            let medoid_free = !chosen.contains(&medoid);
            let pick = if medoid_free && gap_to_anchors(medoid, &anchors) >= delta {
                medoid
            } else {
                let mut far: Option<(usize, T)> = None;
                for v in positions.iter().map(|&p| ctx.pool[p]).filter(|v| !chosen.contains(v)) {
                    let gap = gap_to_anchors(v, &anchors);
                    if far.is_none_or(|(_, g)| gap > g) {
                        far = Some((v, gap));
                    }
                }
                let (far_node, far_gap) = far.expect("community budget never exceeds its pool size");
                if far_gap < delta && medoid_free {
                    medoid
                } else {
                    far_node
                }
            };
            chosen.push(pick);
            anchors.push(pick);
        }
    }
    Ok(Selection { chosen, scores: None })
}

/// Empirical percentile of each value within the slice: `(r − 1)/(n − 1)`
/// for average rank `r`; a single value maps to 1.
pub fn percentile_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    percentile_ranks_within(values, T::zero())
}

/// As [`percentile_ranks`], with values within `tol` of a sorted neighbour
/// counted as tied.
pub fn percentile_ranks_within<T: Scalar>(values: &[T], tol: T) -> Vec<T> {
    if values.len() == 1 {
        return vec![T::one()];
    }
    let denom = T::of_usize(values.len() - 1);
    average_ranks_within(values, tol)
        .into_iter()
        .map(|r| (r - T::one()) / denom)
        .collect()
}

/// Pagerank values closer than this are ranked as ties by [`select_age`].
pub const PAGERANK_TIE_TOLERANCE: f64 = 1e-12;

/// Weighted sum of the pool percentiles of entropy, closeness to the
/// k-means centroid and pagerank.
pub fn select_age<T: Scalar>(
    ctx: &SelectionContext<'_, T>,
    weights: &AgeWeights,
    max_iter: usize,
) -> Result<Selection<T>, StrategyError> {
    weights.validate()?;
    let uncertainty = pool_probability_scores(ctx, entropy)?;
    let emb = ctx.pool_embeddings();
    let km = kmeans(&emb, ctx.k, ctx.rng_seed, max_iter)?;
    let density: Vec<T> = (0..emb.rows())
        .map(|i| -distance(emb.row(i), km.centroids.row(km.assignment[i])))
        .collect();
    let centrality = pool_pagerank(ctx)?;
    let (a, b, g) = (T::lit(weights.alpha), T::lit(weights.beta), T::lit(weights.gamma));
    let scores: Vec<T> = percentile_ranks(&uncertainty)
        .into_iter()
        .zip(percentile_ranks(&density))
        // symmetric nodes come out of the power iteration a few ulps apart
        .zip(percentile_ranks_within(&centrality, T::lit(PAGERANK_TIE_TOLERANCE)))
        .map(|((u, d), c)| a * u + b * d + g * c)
        .collect();
    Ok(ranked(ctx, scores))
}
