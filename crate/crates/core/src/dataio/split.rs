use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::scalar::Scalar;

/// Holdout/pool partition of the node set. Both lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub holdout: Vec<usize>,
    pub pool: Vec<usize>,
}

impl Split {
    /// Uniform sample without replacement of `round(fraction · n)` holdout
    /// nodes; everything else is pool.
    pub fn random(node_count: usize, holdout_fraction: f64, seed: u64) -> Result<Self, DataError> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(DataError::Split(format!(
                "holdout fraction must lie in (0, 1), got {holdout_fraction}"
            )));
        }
        let size = (holdout_fraction * node_count as f64).round() as usize;
        if size == 0 {
            return Err(DataError::Split(format!(
                "holdout fraction {holdout_fraction} of {node_count} nodes leaves the holdout empty"
            )));
        }
        if size >= node_count {
            return Err(DataError::Split(format!(
                "holdout fraction {holdout_fraction} of {node_count} nodes leaves the pool empty"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_holdout = vec![false; node_count];
        for i in rand::seq::index::sample(&mut rng, node_count, size) {
            in_holdout[i] = true;
        }
        let (holdout, pool) = (0..node_count).partition(|&v| in_holdout[v]);
        Ok(Self { holdout, pool })
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }
}

pub fn make_split<T: Scalar>(dataset: &Dataset<T>, holdout_fraction: f64, seed: u64) -> Result<Split, DataError> {
    Split::random(dataset.node_count(), holdout_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twenty_percent_of_thirty() {
        let s = Split::random(30, 0.2, 1).unwrap();
        assert_eq!(s.holdout.len(), 6);
        assert_eq!(s.pool.len(), 24);
    }

    #[test]
    fn half_of_two() {
        let s = Split::random(2, 0.5, 3).unwrap();
        assert_eq!((s.holdout.len(), s.pool.len()), (1, 1));
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(Split::random(40, 0.2, 9).unwrap(), Split::random(40, 0.2, 9).unwrap());
        assert_ne!(Split::random(40, 0.2, 9).unwrap(), Split::random(40, 0.2, 10).unwrap());
    }

    #[test]
    fn degenerate_fractions_rejected() {
        assert!(Split::random(10, 0.01, 0).is_err());
        assert!(Split::random(10, 0.99, 0).is_err());
        assert!(Split::random(10, 0.0, 0).is_err());
        assert!(Split::random(10, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
            if let Ok(s) = Split::random(n, frac, seed) {
                let mut all: Vec<usize> = s.holdout.iter().chain(&s.pool).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(s.holdout.len(), (frac * n as f64).round() as usize);
            }
        }
    }
}
