//! Query diversity and user-burden measures over per-node query histories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{compute_centrality, CentralityMetric, Graph, GraphError};
use crate::scalar::Scalar;
use crate::stats::{correlation, CorrelationMethod, StatsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BurdenError {
    #[error("query log is empty")]
    EmptyLog,
    #[error("no node was queried at least twice")]
    NoRepeatedQueries,
    #[error("node {0} is not in the pool")]
    NotInPool(usize),
    #[error("node {node} queried on day {day} after day {last}")]
    NonIncreasingDay { node: usize, day: u32, last: u32 },
    #[error("gap threshold must be at least 1, got {0}")]
    InvalidThreshold(u32),
    #[error("correlation needs at least 3 nodes with a defined burden value, got {0}")]
    TooFewNodes(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-node query days for one run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryLog {
    pool: Vec<usize>,
    days: BTreeMap<usize, Vec<u32>>,
    total: usize,
}

impl QueryLog {
    /// Empty log over the given pool node ids.
    pub fn new(mut pool: Vec<usize>) -> Self {
        pool.sort_unstable();
        pool.dedup();
        Self {
            pool,
            days: BTreeMap::new(),
            total: 0,
        }
    }

    /// Empty log whose pool is `0..n`.
    pub fn with_pool_size(n: usize) -> Self {
        Self::new((0..n).collect())
    }

    pub fn record(&mut self, node: usize, day: u32) -> Result<(), BurdenError> {
        if self.pool.binary_search(&node).is_err() {
            return Err(BurdenError::NotInPool(node));
        }
        let days = self.days.entry(node).or_default();
        if let Some(&last) = days.last() {
            if day <= last {
                return Err(BurdenError::NonIncreasingDay { node, day, last });
            }
        }
        days.push(day);
        self.total += 1;
        Ok(())
    }

    pub fn record_all(&mut self, nodes: &[usize], day: u32) -> Result<(), BurdenError> {
        nodes.iter().try_for_each(|&v| self.record(v, day))
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    pub fn total_queries(&self) -> usize {
        self.total
    }

    pub fn unique_queried(&self) -> usize {
        self.days.len()
    }

    pub fn days_of(&self, node: usize) -> &[u32] {
        self.days.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn query_count(&self, node: usize) -> usize {
        self.days_of(node).len()
    }

    pub fn is_queried(&self, node: usize) -> bool {
        self.days.contains_key(&node)
    }

    /// Queried nodes in ascending id order with their days.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[u32])> {
        self.days.iter().map(|(&v, d)| (v, d.as_slice()))
    }

    pub fn queried_nodes(&self) -> Vec<usize> {
        self.days.keys().copied().collect()
    }

    fn gaps(days: &[u32]) -> impl Iterator<Item = u32> + '_ {
        days.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_gap(&self, node: usize) -> Option<u32> {
        Self::gaps(self.days_of(node)).min()
    }

    pub fn mean_gap<T: Scalar>(&self, node: usize) -> Option<T> {
        let days = self.days_of(node);
        (days.len() >= 2).then(|| {
            let span = T::lit(f64::from(days[days.len() - 1] - days[0]));
            span / T::of_usize(days.len() - 1)
        })
    }
}

/// `−Σ pᵢ ln pᵢ` over the share of queries each node received.
pub fn sampling_entropy<T: Scalar>(log: &QueryLog) -> Result<T, BurdenError> {
    if log.total_queries() == 0 {
        return Err(BurdenError::EmptyLog);
    }
    let total = T::of_usize(log.total_queries());
    Ok(-log
        .iter()
        .map(|(_, d)| {
            let p = T::of_usize(d.len()) / total;
            p * p.ln()
        })
        .sum::<T>()
        .min(T::zero()))
}

/// Share of pool nodes queried at least once.
pub fn coverage_ratio<T: Scalar>(log: &QueryLog) -> T {
    if log.pool_size() == 0 {
        return T::zero();
    }
    T::of_usize(log.unique_queried()) / T::of_usize(log.pool_size())
}

/// Mean over nodes queried at least twice of their mean consecutive gap.
pub fn average_time_gap<T: Scalar>(log: &QueryLog) -> Result<T, BurdenError> {
    let per_node: Vec<T> = log.iter().filter_map(|(v, _)| log.mean_gap(v)).collect();
    if per_node.is_empty() {
        return Err(BurdenError::NoRepeatedQueries);
    }
    Ok(per_node.iter().copied().sum::<T>() / T::of_usize(per_node.len()))
}

/// Share of nodes queried at least twice whose smallest gap is below
/// `threshold`.
pub fn within_gap_percentage<T: Scalar>(log: &QueryLog, threshold: u32) -> Result<T, BurdenError> {
    if threshold < 1 {
        return Err(BurdenError::InvalidThreshold(threshold));
    }
    let gaps: Vec<u32> = log.iter().filter_map(|(v, _)| log.min_gap(v)).collect();
    if gaps.is_empty() {
        return Err(BurdenError::NoRepeatedQueries);
    }
    let within = gaps.iter().filter(|&&g| g < threshold).count();
    Ok(T::of_usize(within) / T::of_usize(gaps.len()))
}

/// Share of queried nodes with at least one gap of `threshold` days or less.
pub fn over_exertion<T: Scalar>(log: &QueryLog, threshold: u32) -> Result<T, BurdenError> {
    if log.unique_queried() == 0 {
        return Err(BurdenError::EmptyLog);
    }
    let exerted = log
        .iter()
        .filter(|(v, _)| log.min_gap(*v).is_some_and(|g| g <= threshold))
        .count();
    Ok(T::of_usize(exerted) / T::of_usize(log.unique_queried()))
}

/// All burden measures for one log; `None` marks a measure that is
/// undefined for this log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BurdenReport<T> {
    pub sampling_entropy: Option<T>,
    pub coverage_ratio: T,
    pub average_time_gap: Option<T>,
    /// `(threshold, value)`
    pub within_gap_pct: Vec<(u32, Option<T>)>,
    pub over_exertion: Vec<(u32, Option<T>)>,
}

impl<T: Scalar> BurdenReport<T> {
    pub fn compute(log: &QueryLog, thresholds: &[u32]) -> Self {
        Self {
            sampling_entropy: sampling_entropy(log).ok(),
            coverage_ratio: coverage_ratio(log),
            average_time_gap: average_time_gap(log).ok(),
            within_gap_pct: thresholds
                .iter()
                .map(|&k| (k, within_gap_percentage(log, k).ok()))
                .collect(),
            over_exertion: thresholds.iter().map(|&k| (k, over_exertion(log, k).ok())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurdenQuantity {
    QueryCount,
    MinGap,
    MeanGap,
}

impl BurdenQuantity {
    pub const ALL: [BurdenQuantity; 3] = [Self::QueryCount, Self::MinGap, Self::MeanGap];

    pub fn name(self) -> &'static str {
        match self {
            Self::QueryCount => "query_count",
            Self::MinGap => "min_gap",
            Self::MeanGap => "mean_gap",
        }
    }

    fn value<T: Scalar>(self, log: &QueryLog, node: usize) -> Option<T> {
        match self {
            Self::QueryCount => Some(T::of_usize(log.query_count(node))),
            Self::MinGap => log.min_gap(node).map(|g| T::lit(f64::from(g))),
            Self::MeanGap => log.mean_gap(node),
        }
    }
}

/// Correlation of a precomputed centrality vector with a burden quantity
/// over the pool nodes where the quantity is defined.
pub fn centrality_values_burden_correlation<T: Scalar>(
    log: &QueryLog,
    centrality: &[T],
    quantity: BurdenQuantity,
    method: CorrelationMethod,
) -> Result<T, BurdenError> {
    let (xs, ys): (Vec<T>, Vec<T>) = log
        .pool()
        .iter()
        .filter_map(|&v| Some((*centrality.get(v)?, quantity.value::<T>(log, v)?)))
        .unzip();
    if xs.len() < 3 {
        return Err(BurdenError::TooFewNodes(xs.len()));
    }
    Ok(correlation(method, &xs, &ys)?)
}

pub fn centrality_burden_correlation<T: Scalar>(
    log: &QueryLog,
    g: &Graph,
    metric: CentralityMetric,
    quantity: BurdenQuantity,
    method: CorrelationMethod,
) -> Result<T, BurdenError> {
    let c = compute_centrality::<T>(g, metric)?;
    centrality_values_burden_correlation(log, &c.values, quantity, method)
}

/// Min-max normalization to `[0, 1]`; a constant vector maps to zeros.
pub fn min_max_normalize<T: Scalar>(values: &[T]) -> Vec<T> {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}

/// Query-count-weighted mean of normalized centrality over the queried
/// nodes of one log. `None` for an empty log.
pub fn weighted_normalized_centrality<T: Scalar>(log: &QueryLog, normalized: &[T]) -> Option<T> {
    if log.total_queries() == 0 {
        return None;
    }
    let sum: T = log.iter().map(|(v, d)| T::of_usize(d.len()) * normalized[v]).sum();
    Some(sum / T::of_usize(log.total_queries()))
}

/// One row per log, one column per metric in `metrics` order.
pub fn mean_normalized_centrality<T: Scalar>(
    logs: &[(String, QueryLog)],
    g: &Graph,
    metrics: &[CentralityMetric],
) -> Result<Vec<(String, Vec<Option<T>>)>, BurdenError> {
    let normalized = metrics
        .iter()
        .map(|&m| Ok(min_max_normalize(&compute_centrality::<T>(g, m)?.values)))
        .collect::<Result<Vec<_>, GraphError>>()?;
    Ok(logs
        .iter()
        .map(|(name, log)| {
            let row = normalized
                .iter()
                .map(|norm| weighted_normalized_centrality(log, norm))
                .collect();
            (name.clone(), row)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn log_of(pool: usize, entries: &[(usize, &[u32])]) -> QueryLog {
        let mut log = QueryLog::with_pool_size(pool);
        for &(v, days) in entries {
            for &d in days {
                log.record(v, d).unwrap();
            }
        }
        log
    }

    #[test]
    fn record_enforces_order_and_pool() {
        let mut log = QueryLog::new(vec![2, 5]);
        log.record(2, 3).unwrap();
        assert_eq!(
            log.record(2, 3).unwrap_err(),
            BurdenError::NonIncreasingDay {
                node: 2,
                day: 3,
                last: 3
            }
        );
        assert_eq!(log.record(4, 1).unwrap_err(), BurdenError::NotInPool(4));
        assert_eq!(log.total_queries(), 1);
    }

    #[test]
    fn entropy_examples() {
        let one = log_of(4, &[(0, &[1, 2, 3, 4])]);
        assert_eq!(sampling_entropy::<f64>(&one).unwrap(), 0.0);
        let uniform = log_of(8, &(0..8).map(|v| (v, &[1u32][..])).collect::<Vec<_>>());
        assert_abs_diff_eq!(sampling_entropy::<f64>(&uniform).unwrap(), 8f64.ln(), epsilon = 1e-12);
        let skew = log_of(2, &[(0, &[1, 2, 3]), (1, &[1])]);
        assert_abs_diff_eq!(
            sampling_entropy::<f64>(&skew).unwrap(),
            0.562_335_144_618_9,
            epsilon = 1e-10
        );
        assert_eq!(
            sampling_entropy::<f64>(&QueryLog::with_pool_size(3)).unwrap_err(),
            BurdenError::EmptyLog
        );
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage_ratio::<f64>(&QueryLog::with_pool_size(5)), 0.0);
        let log = log_of(24, &[(0, &[1]), (3, &[2]), (9, &[4, 6])]);
        assert_eq!(coverage_ratio::<f64>(&log), 0.125);
    }

    #[test]
    fn time_gap_examples() {
        let log = log_of(3, &[(0, &[1, 2, 3])]);
        assert_eq!(average_time_gap::<f64>(&log).unwrap(), 1.0);
        let log = log_of(3, &[(0, &[1, 2, 3]), (1, &[0, 3, 6]), (2, &[4])]);
        assert_eq!(average_time_gap::<f64>(&log).unwrap(), 2.0);
        let once = log_of(3, &[(0, &[1]), (1, &[2])]);
        assert_eq!(
            average_time_gap::<f64>(&once).unwrap_err(),
            BurdenError::NoRepeatedQueries
        );
    }

    #[test]
    fn within_gap_examples() {
        let ones = log_of(2, &[(0, &[1, 2, 3]), (1, &[4, 5])]);
        assert_eq!(within_gap_percentage::<f64>(&ones, 2).unwrap(), 1.0);
        let fives = log_of(2, &[(0, &[1, 6, 11]), (1, &[0, 5])]);
        assert_eq!(within_gap_percentage::<f64>(&fives, 2).unwrap(), 0.0);
        // min gaps 1, 2, 4, 3 with threshold 3 → nodes 0 and 1
        let mixed = log_of(
            5,
            &[(0, &[1, 2, 8]), (1, &[0, 2]), (2, &[1, 5, 9]), (3, &[2, 5]), (4, &[7])],
        );
        assert_eq!(within_gap_percentage::<f64>(&mixed, 3).unwrap(), 0.5);
        assert!(within_gap_percentage::<f64>(&mixed, 0).is_err());
    }

    #[test]
    fn over_exertion_examples() {
        let daily = log_of(3, &[(0, &[2, 3, 4, 5]), (1, &[2, 3, 4, 5])]);
        assert_eq!(over_exertion::<f64>(&daily, 3).unwrap(), 1.0);
        let once = log_of(3, &[(0, &[1]), (1, &[2]), (2, &[3])]);
        assert_eq!(over_exertion::<f64>(&once, 3).unwrap(), 0.0);
        // min gaps 1, 2, 4, 3, none: nodes 0, 1, 3 within 3 of 5 sampled
        let mixed = log_of(
            5,
            &[(0, &[1, 2, 8]), (1, &[0, 2]), (2, &[1, 5, 9]), (3, &[2, 5]), (4, &[7])],
        );
        assert_abs_diff_eq!(over_exertion::<f64>(&mixed, 3).unwrap(), 0.6);
        assert_eq!(
            over_exertion::<f64>(&QueryLog::with_pool_size(2), 3).unwrap_err(),
            BurdenError::EmptyLog
        );
    }

    #[test]
    fn correlation_with_proportional_burden() {
        let g = Graph::star(5).unwrap();
        // query counts equal to path degrees 1, 2, 2, 2, 1
        let path = Graph::path(5).unwrap();
        let log = log_of(5, &[(0, &[1]), (1, &[1, 2]), (2, &[1, 2]), (3, &[1, 2]), (4, &[1])]);
        let r = centrality_burden_correlation::<f64>(
            &log,
            &path,
            CentralityMetric::Degree,
            BurdenQuantity::QueryCount,
            CorrelationMethod::Pearson,
        )
        .unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        let none = QueryLog::with_pool_size(5);
        let err = centrality_burden_correlation::<f64>(
            &none,
            &g,
            CentralityMetric::Degree,
            BurdenQuantity::QueryCount,
            CorrelationMethod::Spearman,
        );
        assert!(matches!(err, Err(BurdenError::Stats(StatsError::ZeroVariance))));
    }

    #[test]
    fn star_center_has_unit_normalized_degree() {
        let g = Graph::star(6).unwrap();
        let log = log_of(6, &[(0, &[1, 2, 3])]);
        let table = mean_normalized_centrality::<f64>(
            &[("center".into(), log), ("empty".into(), QueryLog::with_pool_size(6))],
            &g,
            &[CentralityMetric::Degree],
        )
        .unwrap();
        assert_eq!(table[0].1, vec![Some(1.0)]);
        assert_eq!(table[1].1, vec![None]);
    }

    #[test]
    fn report_marks_undefined_measures() {
        let log = log_of(4, &[(0, &[1]), (2, &[3])]);
        let r = BurdenReport::<f64>::compute(&log, &[1, 3]);
        assert_eq!(r.coverage_ratio, 0.5);
        assert_eq!(r.average_time_gap, None);
        assert_eq!(r.within_gap_pct, vec![(1, None), (3, None)]);
        assert_eq!(r.over_exertion, vec![(1, Some(0.0)), (3, Some(0.0))]);
    }

    fn arb_log() -> impl Strategy<Value = QueryLog> {
        prop::collection::vec(prop::collection::btree_set(0u32..30, 0..6), 6).prop_map(|sets| {
            let mut log = QueryLog::with_pool_size(6);
            for (v, days) in sets.iter().enumerate() {
                for &d in days {
                    log.record(v, d).unwrap();
                }
            }
            log
        })
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_unique_count(log in arb_log()) {
            if let Ok(h) = sampling_entropy::<f64>(&log) {
                prop_assert!(h >= 0.0);
                prop_assert!(h <= (log.unique_queried() as f64).ln() + 1e-12);
            }
        }

        #[test]
        fn over_exertion_monotone_in_threshold(log in arb_log()) {
            if log.unique_queried() > 0 {
                prop_assert_eq!(over_exertion::<f64>(&log, 0).unwrap(), 0.0);
                let mut prev = 0.0;
                for k in 1..10 {
                    let v = over_exertion::<f64>(&log, k).unwrap();
                    prop_assert!(v >= prev && (0.0..=1.0).contains(&v));
                    prev = v;
                }
            }
        }

        #[test]
        fn average_gap_matches_double_loop(log in arb_log()) {
            let mut outer = Vec::new();
            for v in 0..6 {
                let d = log.days_of(v);
                if d.len() >= 2 {
                    let mut s = 0.0;
                    for i in 1..d.len() {
                        s += f64::from(d[i] - d[i - 1]);
                    }
                    outer.push(s / (d.len() - 1) as f64);
                }
            }
            match average_time_gap::<f64>(&log) {
                Ok(v) => prop_assert!((v - outer.iter().sum::<f64>() / outer.len() as f64).abs() < 1e-12),
                Err(_) => prop_assert!(outer.is_empty()),
            }
        }
    }
}
