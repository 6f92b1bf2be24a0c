//! Reference two-layer graph convolution classifier.
//!
//! ```text
//! Z1 = Â X W1      H = ReLU(Z1)      Z2 = Â H W2      P = softmax(Z2)
//! ```
//!
//! with `Â = D^{-1/2}(A + I)D^{-1/2}`. Gradients are derived by hand; see
//! [`loss_and_gradients`].

mod gcn;
mod train;

use serde::{Deserialize, Serialize};

pub use gcn::{build_normalized_adjacency, embed, forward, loss_and_gradients, NormalizedAdjacency};
pub use train::{init_params, train, train_with_history, LabeledExample};

use crate::dataio::Label;
use crate::linalg::{Matrix, ShapeError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("training mask is empty")]
    EmptyMask,
    #[error("masked node {0} has no label")]
    MissingLabel(usize),
    #[error("masked node {node} outside [0, {node_count})")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training requires at least one labeled example")]
    NoTrainingData,
    #[error("model-based embedding requires trained parameters")]
    MissingParams,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
}

/// Layer weights: `w1` is `feature_dim × hidden_dim`, `w2` is `hidden_dim × 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
}

impl<T: Scalar> GcnParams<T> {
    pub fn zeros(feature_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w1: Matrix::zeros(feature_dim, hidden_dim),
            w2: Matrix::zeros(hidden_dim, 2),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput<T> {
    /// `node_count × 2`, each row a distribution over {class 0, class 1}
    pub probabilities: Matrix<T>,
    /// `node_count × hidden_dim`, post-ReLU first-layer activations
    pub hidden: Matrix<T>,
}

impl<T: Scalar> ModelOutput<T> {
    /// Probability of class 1 for `node`.
    #[inline]
    pub fn positive_probability(&self, node: usize) -> T {
        self.probabilities[(node, 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub hidden_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub weighting: LossWeighting,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            lr: 0.05,
            epochs: 200,
            weighting: LossWeighting::default(),
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 {
            return Err(ModelError::InvalidHyper("hidden_dim must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ModelError::InvalidHyper(format!(
                "lr must be positive and finite, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// How the training loss averages over the labeled buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    /// mean over every labeled (node, day) pair
    #[default]
    PerLabel,
    /// mean over day-examples of each day's masked mean
    PerDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// hidden activations of the trained classifier
    #[default]
    ModelBased,
    /// two untrained propagation hops, `Â(ÂX)`
    Direct,
}

/// Trainable node classifier as seen by the benchmark loop.
pub trait NodeClassifier<T: Scalar> {
    fn fit(&mut self, adj: &NormalizedAdjacency<T>, examples: &[LabeledExample<'_, T>]) -> Result<(), ModelError>;
    fn predict(&self, adj: &NormalizedAdjacency<T>, features: &Matrix<T>) -> Result<ModelOutput<T>, ModelError>;
    fn embed(
        &self,
        mode: EmbeddingMode,
        adj: &NormalizedAdjacency<T>,
        features: &Matrix<T>,
    ) -> Result<Matrix<T>, ModelError>;
}

/// Two-layer GCN retrained from a fixed seed on every `fit`.
#[derive(Debug, Clone)]
pub struct Gcn<T> {
    pub hyper: Hyperparameters,
    pub seed: u64,
    params: Option<GcnParams<T>>,
}

impl<T: Scalar> Gcn<T> {
    pub fn new(hyper: Hyperparameters, seed: u64) -> Self {
        Self {
            hyper,
            seed,
            params: None,
        }
    }

    pub fn params(&self) -> Option<&GcnParams<T>> {
        self.params.as_ref()
    }
}

impl<T: Scalar> NodeClassifier<T> for Gcn<T> {
    fn fit(&mut self, adj: &NormalizedAdjacency<T>, examples: &[LabeledExample<'_, T>]) -> Result<(), ModelError> {
        self.params = Some(train(self.seed, adj, examples, &self.hyper)?);
        Ok(())
    }

    fn predict(&self, adj: &NormalizedAdjacency<T>, features: &Matrix<T>) -> Result<ModelOutput<T>, ModelError> {
        let params = self.params.as_ref().ok_or(ModelError::MissingParams)?;
        forward(params, adj, features)
    }

    fn embed(
        &self,
        mode: EmbeddingMode,
        adj: &NormalizedAdjacency<T>,
        features: &Matrix<T>,
    ) -> Result<Matrix<T>, ModelError> {
        embed(mode, self.params.as_ref(), adj, features)
    }
}

pub(crate) fn check_mask(labels: &[Label], mask: &[usize]) -> Result<(), ModelError> {
    if mask.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    for &v in mask {
        match labels.get(v) {
            None => {
                return Err(ModelError::NodeOutOfRange {
                    node: v,
                    node_count: labels.len(),
                })
            }
            Some(None) => return Err(ModelError::MissingLabel(v)),
            Some(Some(_)) => {}
        }
    }
    Ok(())
}
