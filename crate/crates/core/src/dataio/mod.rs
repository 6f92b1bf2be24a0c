//! Dataset schema, CSV loading and writing, synthetic generation, and the
//! holdout/pool split.

mod csvio;
mod split;
mod synthetic;

pub use csvio::{load_dataset, write_dataset, EDGES_FILE, FEATURES_FILE, LABELS_FILE};
pub use split::{make_split, Split};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use std::path::PathBuf;

use crate::graph::{Graph, GraphError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Binary node label; `None` is a missing observation.
pub type Label = Option<bool>;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error("invalid split: {0}")]
    Split(String),
}

/// One day of node observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DayFrame<T> {
    pub day_index: u32,
    /// `node_count × feature_dim`
    pub features: Matrix<T>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    pub graph: Graph,
    pub days: Vec<DayFrame<T>>,
    pub feature_dim: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Checks shape agreement, strict day ordering, and finiteness.
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        days: Vec<DayFrame<T>>,
        feature_dim: usize,
    ) -> Result<Self, DataError> {
        if feature_dim == 0 {
            return Err(DataError::Invalid("feature_dim must be positive".into()));
        }
        let n = graph.node_count();
        for (i, d) in days.iter().enumerate() {
            if d.features.shape() != (n, feature_dim) {
                return Err(DataError::Invalid(format!(
                    "day {} features are {}x{}, expected {n}x{feature_dim}",
                    d.day_index,
                    d.features.rows(),
                    d.features.cols()
                )));
            }
            if d.labels.len() != n {
                return Err(DataError::Invalid(format!(
                    "day {} has {} labels for {n} nodes",
                    d.day_index,
                    d.labels.len()
                )));
            }
            if !d.features.is_finite() {
                return Err(DataError::Invalid(format!(
                    "day {} contains non-finite features",
                    d.day_index
                )));
            }
            if i > 0 && days[i - 1].day_index >= d.day_index {
                return Err(DataError::Invalid(format!(
                    "days out of order: {} follows {}",
                    d.day_index,
                    days[i - 1].day_index
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            graph,
            days,
            feature_dim,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    #[inline]
    pub fn day_count(&self) -> usize {
        self.days.len()
    }

    /// Fraction of non-missing labels that are positive.
    pub fn positive_rate(&self) -> f64 {
        let (pos, total) = self
            .days
            .iter()
            .flat_map(|d| d.labels.iter().flatten())
            .fold((0usize, 0usize), |(p, t), &l| (p + l as usize, t + 1));
        if total == 0 {
            0.0
        } else {
            pos as f64 / total as f64
        }
    }
}
