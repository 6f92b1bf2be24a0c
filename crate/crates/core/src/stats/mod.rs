//! Omnibus significance tests and correlation with tail probabilities from
//! in-house special functions.

mod special;

use crate::scalar::{average_ranks, Scalar};

pub use special::{chi_square_sf, f_sf, ln_gamma, regularized_beta, regularized_gamma_p, regularized_gamma_q};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} did not converge")]
    NotConverged(&'static str),
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group '{0}' is empty")]
    EmptyGroup(String),
    #[error("need more observations than groups ({observations} observations, {groups} groups)")]
    TooFewObservations { observations: usize, groups: usize },
    #[error("group '{0}' contains a non-finite observation")]
    NonFinite(String),
    #[error("all observations are identical")]
    AllIdentical,
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("exact enumeration needs {0:.3e} labelings, above the limit")]
    TooLargeForExact(f64),
}

/// Named groups of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroups<T> {
    groups: Vec<(String, Vec<T>)>,
}

impl<T: Scalar> SampleGroups<T> {
    pub fn new(groups: Vec<(String, Vec<T>)>) -> Result<Self, StatsError> {
        if groups.len() < 2 {
            return Err(StatsError::TooFewGroups(groups.len()));
        }
        for (name, values) in &groups {
            if values.is_empty() {
                return Err(StatsError::EmptyGroup(name.clone()));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite(name.clone()));
            }
        }
        let observations: usize = groups.iter().map(|(_, v)| v.len()).sum();
        if observations < groups.len() + 1 {
            return Err(StatsError::TooFewObservations {
                observations,
                groups: groups.len(),
            });
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[(String, Vec<T>)] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn observation_count(&self) -> usize {
        self.groups.iter().map(|(_, v)| v.len()).sum()
    }

    fn pooled(&self) -> Vec<T> {
        self.groups.iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|(_, v)| v.len()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult<T> {
    pub f: T,
    pub p: T,
    pub df_between: usize,
    pub df_within: usize,
    /// within-group variance is zero while group means differ; `f` is
    /// infinite and `p` is 0
    pub degenerate: bool,
}

/// One-way ANOVA with the F upper tail.
pub fn anova_oneway<T: Scalar>(groups: &SampleGroups<T>) -> Result<AnovaResult<T>, StatsError> {
    let n = groups.observation_count();
    let g = groups.group_count();
    let pooled = groups.pooled();
    let grand = pooled.iter().copied().sum::<T>() / T::of_usize(n);
    if pooled.iter().all(|&v| v == pooled[0]) {
        return Err(StatsError::AllIdentical);
    }
    let mut ss_between = T::zero();
    let mut ss_within = T::zero();
    for (_, values) in groups.groups() {
        let mean = values.iter().copied().sum::<T>() / T::of_usize(values.len());
        ss_between += T::of_usize(values.len()) * (mean - grand).powi(2);
        ss_within += values.iter().map(|&v| (v - mean).powi(2)).sum::<T>();
    }
    let df_between = g - 1;
    let df_within = n - g;
    if ss_within == T::zero() {
        return Ok(AnovaResult {
            f: T::infinity(),
            p: T::zero(),
            df_between,
            df_within,
            degenerate: true,
        });
    }
    let f = (ss_between / T::of_usize(df_between)) / (ss_within / T::of_usize(df_within));
    let p = f_sf(f, T::of_usize(df_between), T::of_usize(df_within))?;
    Ok(AnovaResult {
        f,
        p,
        df_between,
        df_within,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalResult<T> {
    pub h: T,
    pub p: T,
    pub df: usize,
}

/// Tie-corrected H from per-group rank sums.
fn h_from_rank_sums<T: Scalar>(rank_sums: &[T], sizes: &[usize], n: usize, tie_correction: T) -> T {
    let nf = T::of_usize(n);
    let s: T = rank_sums.iter().zip(sizes).map(|(&r, &m)| r * r / T::of_usize(m)).sum();
    let h = T::lit(12.0) / (nf * (nf + T::one())) * s - T::lit(3.0) * (nf + T::one());
    (h / tie_correction).max(T::zero())
}

fn tie_correction<T: Scalar>(pooled: &[T]) -> T {
    let mut sorted = pooled.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));
    let n = T::of_usize(sorted.len());
    let mut ties = T::zero();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = T::of_usize(j - i + 1);
        ties += t * t * t - t;
        i = j + 1;
    }
    T::one() - ties / (n * n * n - n)
}

fn group_rank_sums<T: Scalar>(ranks: &[T], sizes: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &m in sizes {
        out.push(ranks[start..start + m].iter().copied().sum());
        start += m;
    }
    out
}

/// Kruskal-Wallis H test with average ranks, tie correction and the
/// chi-square approximation for `p`.
pub fn kruskal_wallis<T: Scalar>(groups: &SampleGroups<T>) -> Result<KruskalResult<T>, StatsError> {
    let pooled = groups.pooled();
    let correction = tie_correction(&pooled);
    if correction <= T::zero() {
        return Err(StatsError::AllIdentical);
    }
    let sizes = groups.sizes();
    let ranks = average_ranks(&pooled);
    let h = h_from_rank_sums(&group_rank_sums(&ranks, &sizes), &sizes, pooled.len(), correction);
    let df = groups.group_count() - 1;
    let p = chi_square_sf(h, T::of_usize(df))?;
    Ok(KruskalResult { h, p, df })
}

/// Largest number of group labelings [`kruskal_wallis_exact_p`] will
/// enumerate.
pub const EXACT_LABELING_LIMIT: f64 = 2.0e7;

/// Exact permutation p-value of the Kruskal-Wallis H: the share of all
/// `n! / Π n_j!` assignments of the pooled observations to groups of the
/// observed sizes whose H is at least the observed H.
pub fn kruskal_wallis_exact_p<T: Scalar>(groups: &SampleGroups<T>) -> Result<T, StatsError> {
    let pooled = groups.pooled();
    let n = pooled.len();
    let correction = tie_correction(&pooled);
    if correction <= T::zero() {
        return Err(StatsError::AllIdentical);
    }
    let sizes = groups.sizes();
    let mut labelings = 1.0_f64;
    let mut remaining = n;
    for &m in &sizes {
        labelings *= binomial(remaining, m);
        remaining -= m;
    }
    if labelings > EXACT_LABELING_LIMIT {
        return Err(StatsError::TooLargeForExact(labelings));
    }
    let ranks = average_ranks(&pooled);
    let observed = h_from_rank_sums(&group_rank_sums(&ranks, &sizes), &sizes, n, correction);
    // relative slack so that ties with the observed H count as "at least"
    let threshold = observed - T::lit(1e-9) * observed.max(T::one());

    struct Walk<'a, T> {
        ranks: &'a [T],
        sizes: &'a [usize],
        n: usize,
        correction: T,
        threshold: T,
        capacity: Vec<usize>,
        sums: Vec<T>,
        extreme: u64,
        total: u64,
    }
    impl<T: Scalar> Walk<'_, T> {
        fn go(&mut self, idx: usize) {
            if idx == self.n {
                self.total += 1;
                if h_from_rank_sums(&self.sums, self.sizes, self.n, self.correction) >= self.threshold {
                    self.extreme += 1;
                }
                return;
            }
            for g in 0..self.sizes.len() {
                if self.capacity[g] == 0 {
                    continue;
                }
                self.capacity[g] -= 1;
                self.sums[g] += self.ranks[idx];
                self.go(idx + 1);
                self.sums[g] -= self.ranks[idx];
                self.capacity[g] += 1;
            }
        }
    }
    let mut walk = Walk {
        ranks: &ranks,
        sizes: &sizes,
        n,
        correction,
        threshold,
        capacity: sizes.clone(),
        sums: vec![T::zero(); sizes.len()],
        extreme: 0,
        total: 0,
    };
    walk.go(0);
    Ok(T::of_usize(walk.extreme as usize) / T::of_usize(walk.total as usize))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

/// Pearson product-moment correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
}

/// Spearman correlation: Pearson over average ranks.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn correlation<T: Scalar>(method: CorrelationMethod, x: &[T], y: &[T]) -> Result<T, StatsError> {
    match method {
        CorrelationMethod::Pearson => pearson(x, y),
        CorrelationMethod::Spearman => spearman(x, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn groups(gs: &[&[f64]]) -> SampleGroups<f64> {
        SampleGroups::new(
            gs.iter()
                .enumerate()
                .map(|(i, g)| (format!("g{i}"), g.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn anova_identical_groups() {
        let r = anova_oneway(&groups(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(r.f, 0.0);
        assert_abs_diff_eq!(r.p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn anova_hand_example() {
        let r = anova_oneway(&groups(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]])).unwrap();
        assert_abs_diff_eq!(r.f, 1.5, epsilon = 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        assert!(!r.degenerate);
    }

    #[test]
    fn anova_degenerate_and_identical() {
        let r = anova_oneway(&groups(&[&[1.0, 1.0], &[2.0, 2.0]])).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
        assert_eq!(
            anova_oneway(&groups(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap_err(),
            StatsError::AllIdentical
        );
    }

    #[test]
    fn kruskal_hand_examples() {
        let r = kruskal_wallis(&groups(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        assert_abs_diff_eq!(r.h, 2.4, epsilon = 1e-12);
        assert_eq!(r.df, 1);
        let same = kruskal_wallis(&groups(&[&[1.0, 2.0, 5.0], &[5.0, 2.0, 1.0]])).unwrap();
        assert_abs_diff_eq!(same.h, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(same.p, 1.0, epsilon = 1e-12);
        assert!(kruskal_wallis(&groups(&[&[3.0, 3.0], &[3.0]])).is_err());
    }

    #[test]
    fn exact_p_two_by_two() {
        // the 6 labelings give H = 2.4 twice (most extreme), so p = 1/3
        let p = kruskal_wallis_exact_p(&groups(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_p_refuses_huge_enumerations() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (20..40).map(f64::from).collect();
        let c: Vec<f64> = (40..60).map(f64::from).collect();
        assert!(matches!(
            kruskal_wallis_exact_p(&groups(&[&a, &b, &c])),
            Err(StatsError::TooLargeForExact(_))
        ));
    }

    #[test]
    fn group_validation() {
        assert_eq!(
            SampleGroups::<f64>::new(vec![("a".into(), vec![1.0])]).unwrap_err(),
            StatsError::TooFewGroups(1)
        );
        assert!(matches!(
            SampleGroups::<f64>::new(vec![("a".into(), vec![]), ("b".into(), vec![1.0, 2.0])]),
            Err(StatsError::EmptyGroup(_))
        ));
        assert!(matches!(
            SampleGroups::<f64>::new(vec![("a".into(), vec![1.0]), ("b".into(), vec![1.0])]),
            Err(StatsError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn pearson_and_spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        assert_abs_diff_eq!(spearman(&x, &cubed).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(pearson(&x, &[2.0; 5]).unwrap_err(), StatsError::ZeroVariance);
    }

    proptest! {
        #[test]
        fn tests_are_shift_invariant(
            a in prop::collection::vec(-50.0..50.0f64, 2..8),
            b in prop::collection::vec(-50.0..50.0f64, 2..8),
            shift in -100.0..100.0f64,
        ) {
            let base = groups(&[&a, &b]);
            let shifted_a: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let shifted_b: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let shifted = groups(&[&shifted_a, &shifted_b]);
            if let (Ok(x), Ok(y)) = (anova_oneway(&base), anova_oneway(&shifted)) {
                if !x.degenerate && x.f > 1e-6 {
                    prop_assert!((x.f - y.f).abs() <= 1e-6 * x.f.max(1.0));
                }
                prop_assert!((0.0..=1.0).contains(&x.p));
            }
            let (x, y) = (kruskal_wallis(&base).unwrap(), kruskal_wallis(&shifted).unwrap());
            prop_assert!(x.h >= 0.0 && (0.0..=1.0).contains(&x.p));
            prop_assert!((x.h - y.h).abs() < 1e-9);
        }

        #[test]
        fn kruskal_is_invariant_under_monotone_transform(
            a in prop::collection::vec(-5.0..5.0f64, 2..6),
            b in prop::collection::vec(-5.0..5.0f64, 2..6),
        ) {
            let base = kruskal_wallis(&groups(&[&a, &b])).unwrap();
            let ea: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let eb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
            let mapped = kruskal_wallis(&groups(&[&ea, &eb])).unwrap();
            prop_assert!((base.h - mapped.h).abs() < 1e-9);
        }
    }
}
