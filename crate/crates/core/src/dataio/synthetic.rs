//! Stochastic-block-model sensor network with regime-shifting community
//! signals.
//!
//! Each node `i` in community `c` carries a static offset `o_i`. Each
//! community has a daily signal `s_{c,t}` whose mean is redrawn every
//! `regime_period` days. The label is `s_{c,t} + o_i > 0`; feature `j`
//! observes `cos φ_j · s + sin φ_j · o` plus Gaussian noise, with loading
//! angles spread over `[0, π)` so any two features determine `(s, o)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, DayFrame};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub node_count: usize,
    pub community_count: usize,
    pub days: usize,
    pub feature_dim: usize,
    pub regime_period: usize,
    /// intra-community edge probability
    pub p_in: f64,
    /// inter-community edge probability
    pub p_out: f64,
    /// feature noise standard deviation
    pub noise: f64,
    /// standard deviation of each regime's community mean
    pub signal_scale: f64,
    /// day-to-day jitter of the community signal around its regime mean
    pub daily_jitter: f64,
    /// standard deviation of the static per-node offsets
    pub offset_scale: f64,
    /// probability that any (day, node) label is withheld
    pub missing_label_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            node_count: 40,
            community_count: 2,
            days: 30,
            feature_dim: 4,
            regime_period: 7,
            p_in: 0.3,
            p_out: 0.02,
            noise: 1.0,
            signal_scale: 0.8,
            daily_jitter: 0.3,
            offset_scale: 1.0,
            missing_label_rate: 0.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: String| Err(DataError::Config(m));
        if self.node_count < 10 {
            return fail(format!("node_count must be at least 10, got {}", self.node_count));
        }
        if self.community_count < 2 || self.community_count > self.node_count {
            return fail(format!(
                "community_count must lie in [2, node_count], got {}",
                self.community_count
            ));
        }
        if self.days < 3 {
            return fail(format!("days must be at least 3, got {}", self.days));
        }
        if self.feature_dim < 2 {
            return fail(format!("feature_dim must be at least 2, got {}", self.feature_dim));
        }
        if self.regime_period < 2 {
            return fail(format!("regime_period must be at least 2, got {}", self.regime_period));
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("missing_label_rate", self.missing_label_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.p_in <= self.p_out {
            return fail(format!(
                "p_in ({}) must exceed p_out ({}) for communities to be detectable",
                self.p_in, self.p_out
            ));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("signal_scale", self.signal_scale),
            ("daily_jitter", self.daily_jitter),
            ("offset_scale", self.offset_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        Ok(())
    }

    /// Ground-truth community of `node` (contiguous blocks).
    pub fn community_of(&self, node: usize) -> usize {
        node * self.community_count / self.node_count
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate_synthetic<T: Scalar>(config: &SyntheticConfig, seed: u64) -> Result<Dataset<T>, DataError> {
    config.validate()?;
    let n = config.node_count;
    let dim = config.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if config.community_of(a) == config.community_of(b) {
                config.p_in
            } else {
                config.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    let graph = Graph::new(n, edges)?;

    let loadings: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let phi = std::f64::consts::PI * (j as f64 + 0.5 * rng.random::<f64>()) / dim as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    let offsets: Vec<f64> = (0..n).map(|_| config.offset_scale * normal(&mut rng)).collect();
    let regimes = config.days.div_ceil(config.regime_period);
    let regime_means: Vec<Vec<f64>> = (0..regimes)
        .map(|_| {
            (0..config.community_count)
                .map(|_| config.signal_scale * normal(&mut rng))
                .collect()
        })
        .collect();

    let mut days = Vec::with_capacity(config.days);
    for t in 0..config.days {
        let means = &regime_means[t / config.regime_period];
        let signal: Vec<f64> = means
            .iter()
            .map(|&mu| mu + config.daily_jitter * normal(&mut rng))
            .collect();
        let mut features = Matrix::zeros(n, dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let s = signal[config.community_of(i)];
            let o = offsets[i];
            for (j, &(a, b)) in loadings.iter().enumerate() {
                features[(i, j)] = T::lit(a * s + b * o + config.noise * normal(&mut rng));
            }
            let missing = rng.random::<f64>() < config.missing_label_rate;
            labels.push(if missing { None } else { Some(s + o > 0.0) });
        }
        days.push(DayFrame {
            day_index: t as u32,
            features,
            labels,
        });
    }
    Dataset::new(format!("synthetic-{seed}"), graph, days, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::modularity_partition;

    #[test]
    fn same_seed_is_bit_identical() {
        let c = SyntheticConfig::default();
        let a = generate_synthetic::<f64>(&c, 7).unwrap();
        let b = generate_synthetic::<f64>(&c, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic::<f64>(&c, 8).unwrap());
    }

    #[test]
    fn rejects_undetectable_communities() {
        let c = SyntheticConfig {
            p_in: 0.1,
            p_out: 0.1,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic::<f64>(&c, 0), Err(DataError::Config(_))));
        let c = SyntheticConfig {
            node_count: 9,
            ..Default::default()
        };
        assert!(generate_synthetic::<f64>(&c, 0).is_err());
    }

    /// Fraction of node pairs on which two labelings agree about
    /// same-vs-different community.
    fn pairwise_agreement(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let mut agree = 0;
        let mut total = 0;
        for i in 0..n {
            for j in i + 1..n {
                total += 1;
                if (a[i] == a[j]) == (b[i] == b[j]) {
                    agree += 1;
                }
            }
        }
        agree as f64 / total as f64
    }

    #[test]
    fn modularity_recovers_planted_communities() {
        let c = SyntheticConfig {
            node_count: 30,
            community_count: 2,
            p_in: 0.8,
            p_out: 0.05,
            ..Default::default()
        };
        for seed in 0..5 {
            let ds = generate_synthetic::<f64>(&c, seed).unwrap();
            let truth: Vec<usize> = (0..30).map(|v| c.community_of(v)).collect();
            let found = modularity_partition(&ds.graph);
            let agreement = pairwise_agreement(&truth, &found.community_of);
            assert!(agreement >= 0.9, "seed {seed}: agreement {agreement}");
        }
    }

    /// With two features and no noise, some line through the origin separates
    /// the classes on every day. Checked exhaustively over the critical
    /// angles (those perpendicular to a data point).
    #[test]
    fn noiseless_labels_are_linearly_separable() {
        let c = SyntheticConfig {
            feature_dim: 2,
            noise: 0.0,
            ..Default::default()
        };
        let ds = generate_synthetic::<f64>(&c, 3).unwrap();
        for day in &ds.days {
            let pts: Vec<(f64, f64, bool)> = (0..ds.node_count())
                .map(|i| (day.features[(i, 0)], day.features[(i, 1)], day.labels[i].unwrap()))
                .collect();
            let mut crit: Vec<f64> = pts
                .iter()
                .flat_map(|&(x, y, _)| {
                    let a = y.atan2(x) + std::f64::consts::FRAC_PI_2;
                    [a, a + std::f64::consts::PI]
                })
                .map(|a| a.rem_euclid(2.0 * std::f64::consts::PI))
                .collect();
            crit.sort_by(f64::total_cmp);
            let mut candidates: Vec<f64> = crit.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            candidates.push(0.5 * (crit[crit.len() - 1] + crit[0] + 2.0 * std::f64::consts::PI));
            let separable = candidates.iter().any(|&th| {
                let (wx, wy) = (th.cos(), th.sin());
                pts.iter().all(|&(x, y, l)| (wx * x + wy * y > 0.0) == l)
            });
            assert!(separable, "day {} not separable", day.day_index);
        }
    }

    #[test]
    fn default_labels_are_balanced_over_twenty_seeds() {
        let c = SyntheticConfig::default();
        for seed in 0..20 {
            let rate = generate_synthetic::<f64>(&c, seed).unwrap().positive_rate();
            assert!((0.3..=0.7).contains(&rate), "seed {seed}: positive rate {rate}");
        }
    }

    #[test]
    fn missing_rate_withholds_labels() {
        let c = SyntheticConfig {
            missing_label_rate: 0.5,
            ..Default::default()
        };
        let ds = generate_synthetic::<f64>(&c, 1).unwrap();
        let missing = ds.days.iter().flat_map(|d| &d.labels).filter(|l| l.is_none()).count();
        assert!(missing > 0);
    }
}
