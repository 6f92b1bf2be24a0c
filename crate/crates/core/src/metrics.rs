//! Binary classification metrics, the cumulative performance index and
//! rolling summaries of daily series.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::{average_ranks, cmp_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("evaluation slice is empty")]
    EmptySlice,
    #[error("slice has {labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("slice contains a non-finite score")]
    NonFiniteScore,
    #[error("AUC-ROC undefined: slice contains a single class")]
    SingleClass,
    #[error("AUC-PR undefined: slice has no positives")]
    NoPositives,
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("series needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("series days must be uniformly spaced")]
    NonUniformSpacing,
    #[error("series days must be strictly increasing")]
    NonIncreasingDays,
    #[error("series value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("rolling window must be positive")]
    InvalidWindow,
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
}

/// Where a node sits relative to the query process on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeCategory {
    TestSetSameDay,
    UnqueriedSameDay,
    UnqueriedNextDay,
    TrainNextDay,
}

impl NodeCategory {
    pub const ALL: [NodeCategory; 4] = [
        Self::TestSetSameDay,
        Self::UnqueriedSameDay,
        Self::UnqueriedNextDay,
        Self::TrainNextDay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TestSetSameDay => "test_set_same_day",
            Self::UnqueriedSameDay => "unqueried_same_day",
            Self::UnqueriedNextDay => "unqueried_next_day",
            Self::TrainNextDay => "train_next_day",
        }
    }
}

impl fmt::Display for NodeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeCategory {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_owned()))
    }
}

/// Truth and positive-class probability for the nodes of one category on
/// one day.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSlice<T> {
    pub category: NodeCategory,
    pub day: u32,
    pub truth: Vec<bool>,
    pub scores: Vec<T>,
}

impl<T: Scalar> EvalSlice<T> {
    pub fn new(category: NodeCategory, day: u32, truth: Vec<bool>, scores: Vec<T>) -> Result<Self, MetricError> {
        if truth.is_empty() {
            return Err(MetricError::EmptySlice);
        }
        if truth.len() != scores.len() {
            return Err(MetricError::LengthMismatch {
                labels: truth.len(),
                scores: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(MetricError::NonFiniteScore);
        }
        Ok(Self {
            category,
            day,
            truth,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Confusion {
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
}

impl Confusion {
    fn of<T: Scalar>(slice: &EvalSlice<T>, threshold: f64) -> Result<Self, MetricError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(MetricError::InvalidThreshold(threshold));
        }
        let t = T::lit(threshold);
        let mut c = Confusion::default();
        for (&truth, &p) in slice.truth.iter().zip(&slice.scores) {
            match (truth, p >= t) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// F1 of one class given its true positives, false positives and false
    /// negatives; 0 when the class is absent from truth and prediction.
    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::of_usize(num) / T::of_usize(den)
    }
}

pub fn accuracy<T: Scalar>(slice: &EvalSlice<T>, threshold: f64) -> Result<T, MetricError> {
    let c = Confusion::of(slice, threshold)?;
    Ok(ratio(c.tp + c.tn, c.total()))
}

/// Positive-class precision; 0 when nothing is predicted positive.
pub fn precision<T: Scalar>(slice: &EvalSlice<T>, threshold: f64) -> Result<T, MetricError> {
    let c = Confusion::of(slice, threshold)?;
    Ok(ratio(c.tp, c.tp + c.fp))
}

/// Positive-class recall; 0 when the slice has no positives.
pub fn recall<T: Scalar>(slice: &EvalSlice<T>, threshold: f64) -> Result<T, MetricError> {
    let c = Confusion::of(slice, threshold)?;
    Ok(ratio(c.tp, c.tp + c.fn_))
}

/// Micro-averaged F1 over both classes (equals accuracy).
pub fn f1_micro<T: Scalar>(slice: &EvalSlice<T>, threshold: f64) -> Result<T, MetricError> {
    let c = Confusion::of(slice, threshold)?;
    // summed over classes: TP = tp + tn, FP = FN = fp + fn
    let wrong = c.fp + c.fn_;
    Ok(T::lit(Confusion::f1(c.tp + c.tn, wrong, wrong)))
}

pub fn f1_macro<T: Scalar>(slice: &EvalSlice<T>, threshold: f64) -> Result<T, MetricError> {
    let c = Confusion::of(slice, threshold)?;
    let positive = Confusion::f1(c.tp, c.fp, c.fn_);
    let negative = Confusion::f1(c.tn, c.fn_, c.fp);
    Ok(T::lit(0.5 * (positive + negative)))
}

/// Area under the ROC curve via the Mann-Whitney statistic with average
/// ranks for tied scores.
pub fn auc_roc<T: Scalar>(slice: &EvalSlice<T>) -> Result<T, MetricError> {
    let pos = slice.truth.iter().filter(|&&t| t).count();
    let neg = slice.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let ranks = average_ranks(&slice.scores);
    let rank_sum: T = ranks
        .iter()
        .zip(&slice.truth)
        .filter(|(_, &t)| t)
        .map(|(&r, _)| r)
        .sum();
    let u = rank_sum - T::of_usize(pos * (pos + 1)) / T::lit(2.0);
    Ok(u / (T::of_usize(pos) * T::of_usize(neg)))
}

/// Area under the precision-recall curve as a step sum over every distinct
/// score threshold, `Σ (Rᵢ − Rᵢ₋₁) Pᵢ`.
pub fn auc_pr<T: Scalar>(slice: &EvalSlice<T>) -> Result<T, MetricError> {
    let pos = slice.truth.iter().filter(|&&t| t).count();
    if pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..slice.len()).collect();
    order.sort_by(|&a, &b| cmp_scalar(slice.scores[b], slice.scores[a]));
    let mut area = T::zero();
    let mut prev_recall = T::zero();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = slice.scores[order[i]];
        while i < order.len() && slice.scores[order[i]] == score {
            tp += usize::from(slice.truth[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = T::of_usize(tp) / T::of_usize(pos);
        let precision = T::of_usize(tp) / T::of_usize(seen);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Column identifiers for per-slice metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1Micro,
    F1Macro,
    AucRoc,
    AucPr,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Self::Accuracy,
        Self::Precision,
        Self::Recall,
        Self::F1Micro,
        Self::F1Macro,
        Self::AucRoc,
        Self::AucPr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Accuracy => "accuracy",
            Self::Precision => "precision",
            Self::Recall => "recall",
            Self::F1Micro => "f1_micro",
            Self::F1Macro => "f1_macro",
            Self::AucRoc => "auc_roc",
            Self::AucPr => "auc_pr",
        }
    }

    pub fn evaluate<T: Scalar>(self, slice: &EvalSlice<T>, threshold: f64) -> Result<T, MetricError> {
        match self {
            Self::Accuracy => accuracy(slice, threshold),
            Self::Precision => precision(slice, threshold),
            Self::Recall => recall(slice, threshold),
            Self::F1Micro => f1_micro(slice, threshold),
            Self::F1Macro => f1_macro(slice, threshold),
            Self::AucRoc => auc_roc(slice),
            Self::AucPr => auc_pr(slice),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_owned()))
    }
}

/// Metric values by day.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSeries<T> {
    pub metric: String,
    points: Vec<(u32, T)>,
}

impl<T: Scalar> PerformanceSeries<T> {
    pub fn new(metric: impl Into<String>, points: Vec<(u32, T)>) -> Result<Self, MetricError> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(MetricError::NonIncreasingDays);
        }
        if let Some(&(_, v)) = points
            .iter()
            .find(|(_, v)| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
        {
            return Err(MetricError::OutOfRange(v.as_f64()));
        }
        Ok(Self {
            metric: metric.into(),
            points,
        })
    }

    pub fn points(&self) -> &[(u32, T)] {
        &self.points
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cumulative performance index: trapezoid area over the `T − 1`
/// intervals divided by `(T − 1)·Δt`.
pub fn cpi<T: Scalar>(series: &PerformanceSeries<T>) -> Result<T, MetricError> {
    let pts = series.points();
    if pts.len() < 2 {
        return Err(MetricError::TooFewPoints(pts.len()));
    }
    let step = pts[1].0 - pts[0].0;
    if pts.windows(2).any(|w| w[1].0 - w[0].0 != step) {
        return Err(MetricError::NonUniformSpacing);
    }
    let dt = T::lit(f64::from(step));
    let half = T::lit(0.5);
    let area: T = pts.windows(2).map(|w| (w[0].1 + w[1].1) * half * dt).sum();
    let intervals = T::of_usize(pts.len() - 1);
    Ok(area / (intervals * dt))
}

/// Trailing-window mean and population standard deviation; the first
/// points use every point seen so far.
pub fn rolling_mean_std<T: Scalar>(
    series: &PerformanceSeries<T>,
    window: usize,
) -> Result<(PerformanceSeries<T>, PerformanceSeries<T>), MetricError> {
    if window == 0 {
        return Err(MetricError::InvalidWindow);
    }
    let pts = series.points();
    let mut means = Vec::with_capacity(pts.len());
    let mut stds = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        let w = &pts[(i + 1).saturating_sub(window)..=i];
        let n = T::of_usize(w.len());
        let mean = w.iter().map(|&(_, v)| v).sum::<T>() / n;
        let var = w.iter().map(|&(_, v)| (v - mean).powi(2)).sum::<T>() / n;
        // clamp rounding so values stay inside [0, 1]
        means.push((pts[i].0, mean.max(T::zero()).min(T::one())));
        stds.push((pts[i].0, var.sqrt()));
    }
    Ok((
        PerformanceSeries::new(format!("{}_rolling_mean", series.metric), means)?,
        PerformanceSeries::new(format!("{}_rolling_std", series.metric), stds)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn slice(truth: &[bool], scores: &[f64]) -> EvalSlice<f64> {
        EvalSlice::new(NodeCategory::TestSetSameDay, 0, truth.to_vec(), scores.to_vec()).unwrap()
    }

    fn series(values: &[f64]) -> PerformanceSeries<f64> {
        PerformanceSeries::new(
            "accuracy",
            values.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let s = slice(&[true, false, true, false], &[0.9, 0.1, 0.8, 0.3]);
        for m in Metric::ALL {
            assert_eq!(m.evaluate(&s, DEFAULT_THRESHOLD).unwrap(), 1.0, "{m}");
        }
    }

    #[test]
    fn confusion_hand_example() {
        let s = slice(&[true, true, false, false], &[0.9, 0.4, 0.6, 0.1]);
        assert_eq!(accuracy(&s, 0.5).unwrap(), 0.5);
        assert_eq!(precision(&s, 0.5).unwrap(), 0.5);
        assert_eq!(recall(&s, 0.5).unwrap(), 0.5);
        assert_eq!(f1_macro(&s, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn absent_class_contributes_zero_to_macro_f1() {
        let s = slice(&[true, true, true], &[0.9, 0.7, 0.6]);
        assert_eq!(recall(&s, 0.5).unwrap(), 1.0);
        assert_eq!(f1_macro(&s, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn threshold_is_inclusive_and_validated() {
        let s = slice(&[true], &[0.5]);
        assert_eq!(accuracy(&s, 0.5).unwrap(), 1.0);
        assert_eq!(accuracy(&s, 1.0).unwrap_err(), MetricError::InvalidThreshold(1.0));
    }

    #[test]
    fn empty_and_mismatched_slices() {
        assert_eq!(
            EvalSlice::<f64>::new(NodeCategory::TrainNextDay, 0, vec![], vec![]).unwrap_err(),
            MetricError::EmptySlice
        );
        assert!(EvalSlice::new(NodeCategory::TrainNextDay, 0, vec![true], vec![0.1, 0.2]).is_err());
        assert!(EvalSlice::new(NodeCategory::TrainNextDay, 0, vec![true], vec![f64::NAN]).is_err());
    }

    #[test]
    fn auc_roc_extremes() {
        assert_eq!(
            auc_roc(&slice(&[false, false, true, true], &[0.1, 0.2, 0.3, 0.4])).unwrap(),
            1.0
        );
        assert_eq!(auc_roc(&slice(&[false, true, true, false], &[0.3; 4])).unwrap(), 0.5);
        assert_eq!(
            auc_roc(&slice(&[true, true], &[0.1, 0.2])).unwrap_err(),
            MetricError::SingleClass
        );
    }

    #[test]
    fn auc_pr_examples() {
        assert_eq!(auc_pr(&slice(&[true, true, false], &[0.9, 0.8, 0.1])).unwrap(), 1.0);
        assert_eq!(
            auc_pr(&slice(&[false, false, false, true], &[0.9, 0.8, 0.7, 0.1])).unwrap(),
            0.25
        );
        assert_eq!(
            auc_pr(&slice(&[false, false], &[0.9, 0.8])).unwrap_err(),
            MetricError::NoPositives
        );
    }

    #[test]
    fn cpi_examples() {
        assert_eq!(cpi(&series(&[1.0; 7])).unwrap(), 1.0);
        assert_abs_diff_eq!(cpi(&series(&[0.3; 5])).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(cpi(&series(&[0.0, 1.0, 0.0])).unwrap(), 0.5);
        assert_eq!(cpi(&series(&[0.4])).unwrap_err(), MetricError::TooFewPoints(1));
        let gappy = PerformanceSeries::new("accuracy", vec![(0, 0.5), (1, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(cpi(&gappy).unwrap_err(), MetricError::NonUniformSpacing);
        let spaced = PerformanceSeries::new("accuracy", vec![(0, 0.0), (2, 1.0), (4, 0.0)]).unwrap();
        assert_eq!(cpi(&spaced).unwrap(), 0.5);
    }

    #[test]
    fn series_validation() {
        assert_eq!(
            PerformanceSeries::new("x", vec![(1, 0.5), (1, 0.5)]).unwrap_err(),
            MetricError::NonIncreasingDays
        );
        assert_eq!(
            PerformanceSeries::new("x", vec![(1, 1.5)]).unwrap_err(),
            MetricError::OutOfRange(1.5)
        );
    }

    #[test]
    fn rolling_examples() {
        let (m, s) = rolling_mean_std(&series(&[0.1, 0.2, 0.3, 0.4]), 2).unwrap();
        let means: Vec<f64> = m.values().collect();
        for (a, b) in means.iter().zip([0.1, 0.15, 0.25, 0.35]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.points()[1].1, 0.05, epsilon = 1e-15);
        let (m, s) = rolling_mean_std(&series(&[0.2, 0.9, 0.4]), 1).unwrap();
        assert_eq!(m.values().collect::<Vec<_>>(), vec![0.2, 0.9, 0.4]);
        assert!(s.values().all(|v| v == 0.0));
        assert_eq!(
            rolling_mean_std(&series(&[0.2]), 0).unwrap_err(),
            MetricError::InvalidWindow
        );
    }

    #[test]
    fn names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        for c in NodeCategory::ALL {
            assert_eq!(c.name().parse::<NodeCategory>().unwrap(), c);
        }
    }

    fn arb_slice() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
        (2usize..20).prop_flat_map(|n| {
            (
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(0.0..1.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn f1_micro_equals_accuracy((truth, scores) in arb_slice()) {
            let s = slice(&truth, &scores);
            prop_assert!((f1_micro(&s, 0.5).unwrap() - accuracy(&s, 0.5).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auc_roc_invariant_under_monotone_map((truth, scores) in arb_slice()) {
            let s = slice(&truth, &scores);
            let mapped: Vec<f64> = scores.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            let m = slice(&truth, &mapped);
            match (auc_roc(&s), auc_roc(&m)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12 && (0.0..=1.0).contains(&a)),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }

        #[test]
        fn metrics_invariant_under_permutation((truth, scores) in arb_slice(), rot in 0usize..20) {
            let s = slice(&truth, &scores);
            let k = rot % truth.len();
            let (mut t2, mut s2) = (truth.clone(), scores.clone());
            t2.rotate_left(k);
            s2.rotate_left(k);
            let p = slice(&t2, &s2);
            for m in Metric::ALL {
                match (m.evaluate(&s, 0.5), m.evaluate(&p, 0.5)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12, "{}", m),
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }

        #[test]
        fn cpi_between_extremes(values in prop::collection::vec(0.0..=1.0f64, 2..30)) {
            let c = cpi(&series(&values)).unwrap();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
        }
    }
}
