use super::{check_mask, EmbeddingMode, GcnParams, ModelError, ModelOutput};
use crate::dataio::Label;
use crate::graph::Graph;
use crate::linalg::{CsrMatrix, Matrix, ShapeError};
use crate::scalar::Scalar;

/// `Â = D^{-1/2}(A + I)D^{-1/2}`, stored sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    csr: CsrMatrix<T>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn node_count(&self) -> usize {
        self.csr.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.csr.get(r, c)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        self.csr.to_dense()
    }

    /// Nonzero `(column, value)` pairs of row `r`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.csr.row_entries(r)
    }

    /// `Â · x`
    pub fn propagate(&self, x: &Matrix<T>) -> Result<Matrix<T>, ShapeError> {
        self.csr.mul_dense(x)
    }

    /// `Âᵀ · x` (equal to `Â · x`; kept separate so the backward pass reads
    /// as derived)
    pub fn propagate_transposed(&self, x: &Matrix<T>) -> Result<Matrix<T>, ShapeError> {
        self.csr.t_mul_dense(x)
    }
}

pub fn build_normalized_adjacency<T: Scalar>(g: &Graph) -> NormalizedAdjacency<T> {
    let n = g.node_count();
    let inv_sqrt: Vec<T> = (0..n).map(|v| T::one() / T::of_usize(g.degree(v) + 1).sqrt()).collect();
    let rows = (0..n)
        .map(|v| {
            std::iter::once(v)
                .chain(g.neighbors(v).iter().copied())
                .map(|u| (u, inv_sqrt[v] * inv_sqrt[u]))
                .collect()
        })
        .collect();
    NormalizedAdjacency {
        csr: CsrMatrix::from_rows(rows),
    }
}

/// Intermediates of one forward pass on pre-propagated features `ÂX`.
pub(crate) struct ForwardCache<T> {
    pub z1: Matrix<T>,
    pub hidden: Matrix<T>,
    pub logits: Matrix<T>,
    pub probabilities: Matrix<T>,
}

fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    p
}

fn check_input<T: Scalar>(
    params: &GcnParams<T>,
    adj: &NormalizedAdjacency<T>,
    x: &Matrix<T>,
) -> Result<(), ShapeError> {
    if x.rows() != adj.node_count() {
        return Err(ShapeError(format!(
            "feature matrix has {} rows for {} nodes",
            x.rows(),
            adj.node_count()
        )));
    }
    if x.cols() != params.feature_dim() {
        return Err(ShapeError(format!(
            "feature matrix has {} columns, model expects {}",
            x.cols(),
            params.feature_dim()
        )));
    }
    if params.w2.shape() != (params.hidden_dim(), 2) {
        return Err(ShapeError(format!(
            "second layer is {}x{}, expected {}x2",
            params.w2.rows(),
            params.w2.cols(),
            params.hidden_dim()
        )));
    }
    Ok(())
}

pub(crate) fn forward_propagated<T: Scalar>(
    params: &GcnParams<T>,
    adj: &NormalizedAdjacency<T>,
    ax: &Matrix<T>,
) -> Result<ForwardCache<T>, ShapeError> {
    let z1 = ax.matmul(&params.w1)?;
    let hidden = z1.map(|v| v.max(T::zero()));
    // Â(HW2) == (ÂH)W2, with the narrow product first
    let logits = adj.propagate(&hidden.matmul(&params.w2)?)?;
    let probabilities = softmax_rows(&logits);
    Ok(ForwardCache {
        z1,
        hidden,
        logits,
        probabilities,
    })
}

/// `hidden = ReLU(ÂXW1)`, `probabilities = softmax(Â·hidden·W2)`.
pub fn forward<T: Scalar>(
    params: &GcnParams<T>,
    adj: &NormalizedAdjacency<T>,
    x: &Matrix<T>,
) -> Result<ModelOutput<T>, ModelError> {
    check_input(params, adj, x)?;
    let cache = forward_propagated(params, adj, &adj.propagate(x)?)?;
    Ok(ModelOutput {
        probabilities: cache.probabilities,
        hidden: cache.hidden,
    })
}

/// Masked mean cross-entropy and its exact gradient.
///
/// With `G = HW2`, `Z2 = ÂG`, and `m` masked nodes:
///
/// ```text
/// dZ2 = (P − Y)/m on masked rows, 0 elsewhere
/// dG  = Âᵀ dZ2          dW2 = Hᵀ dG
/// dH  = dG W2ᵀ          dZ1 = dH ⊙ 1[Z1 > 0]
/// dW1 = (ÂX)ᵀ dZ1
/// ```
pub fn loss_and_gradients<T: Scalar>(
    params: &GcnParams<T>,
    adj: &NormalizedAdjacency<T>,
    x: &Matrix<T>,
    labels: &[Label],
    mask: &[usize],
) -> Result<(T, GcnParams<T>), ModelError> {
    check_input(params, adj, x)?;
    check_mask(labels, mask)?;
    let ax = adj.propagate(x)?;
    Ok(loss_and_gradients_propagated(params, adj, &ax, labels, mask)?)
}

/// As [`loss_and_gradients`] with `ÂX` precomputed and inputs already
/// validated.
fn loss_and_gradients_propagated<T: Scalar>(
    params: &GcnParams<T>,
    adj: &NormalizedAdjacency<T>,
    ax: &Matrix<T>,
    labels: &[Label],
    mask: &[usize],
) -> Result<(T, GcnParams<T>), ShapeError> {
    let cache = forward_propagated(params, adj, ax)?;
    let n = ax.rows();
    let m = T::of_usize(mask.len());
    let mut loss = T::zero();
    let mut d_logits = Matrix::zeros(n, 2);
    for &v in mask {
        let class = usize::from(labels[v].unwrap_or(false));
        let z = cache.logits.row(v);
        let max = z[0].max(z[1]);
        let lse = max + ((z[0] - max).exp() + (z[1] - max).exp()).ln();
        loss -= z[class] - lse;
        for c in 0..2 {
            let target = if c == class { T::one() } else { T::zero() };
            d_logits[(v, c)] += (cache.probabilities[(v, c)] - target) / m;
        }
    }
    loss /= m;

    let d_g = adj.propagate_transposed(&d_logits)?;
    let d_w2 = cache.hidden.t_matmul(&d_g)?;
    let mut d_z1 = d_g.matmul_t(&params.w2)?;
    for (d, &z) in d_z1.as_mut_slice().iter_mut().zip(cache.z1.as_slice()) {
        if z <= T::zero() {
            *d = T::zero();
        }
    }
    let d_w1 = ax.t_matmul(&d_z1)?;
    Ok((loss, GcnParams { w1: d_w1, w2: d_w2 }))
}

/// Node embeddings: the trained hidden layer, or two raw propagation hops.
pub fn embed<T: Scalar>(
    mode: EmbeddingMode,
    params: Option<&GcnParams<T>>,
    adj: &NormalizedAdjacency<T>,
    x: &Matrix<T>,
) -> Result<Matrix<T>, ModelError> {
    match mode {
        EmbeddingMode::ModelBased => {
            let params = params.ok_or(ModelError::MissingParams)?;
            Ok(forward(params, adj, x)?.hidden)
        }
        EmbeddingMode::Direct => Ok(adj.propagate(&adj.propagate(x)?)?),
    }
}
