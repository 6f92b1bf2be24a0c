use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gcn::NormalizedAdjacency;
use super::{check_mask, GcnParams, Hyperparameters, LossWeighting, ModelError};
use crate::dataio::Label;
use crate::linalg::{Matrix, ShapeError};
use crate::scalar::Scalar;

/// One day's features and labels with the nodes whose labels are revealed.
#[derive(Debug, Clone)]
pub struct LabeledExample<'a, T> {
    pub features: &'a Matrix<T>,
    pub labels: &'a [Label],
    pub mask: Vec<usize>,
}

/// Uniform `[−1/√fan_in, 1/√fan_in]` initialization, `w1` then `w2` in
/// row-major order.
pub fn init_params<T: Scalar>(seed: u64, feature_dim: usize, hidden_dim: usize) -> GcnParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |rows: usize, cols: usize| {
        let bound = 1.0 / (rows as f64).sqrt();
        Matrix::from_fn(rows, cols, |_, _| T::lit(rng.random_range(-bound..=bound)))
    };
    let w1 = layer(feature_dim, hidden_dim);
    let w2 = layer(hidden_dim, 2);
    GcnParams { w1, w2 }
}

/// Full-batch gradient descent on the mean loss over the whole labeled
/// buffer, weighted per label or per day as `hyper.weighting` says.
pub fn train<T: Scalar>(
    seed: u64,
    adj: &NormalizedAdjacency<T>,
    examples: &[LabeledExample<'_, T>],
    hyper: &Hyperparameters,
) -> Result<GcnParams<T>, ModelError> {
    train_with_history(seed, adj, examples, hyper).map(|(p, _)| p)
}

/// One masked node: its stacked logit terms `(row, Â value)`, its class,
/// and its weight in the averaged loss.
struct Target<T> {
    terms: Vec<(usize, T)>,
    class: usize,
    weight: T,
}

/// All examples stacked into one batch. The loss only reads logits of
/// masked nodes, so each example keeps just the rows of `ÂX` in the
/// closed neighborhood of its mask.
struct Batch<T> {
    ax: Matrix<T>,
    targets: Vec<Target<T>>,
}

impl<T: Scalar> Batch<T> {
    fn build(
        adj: &NormalizedAdjacency<T>,
        examples: &[LabeledExample<'_, T>],
        weighting: LossWeighting,
    ) -> Result<Self, ModelError> {
        let n = adj.node_count();
        let feature_dim = examples[0].features.cols();
        let labels = T::of_usize(examples.iter().map(|e| e.mask.len()).sum());
        let days = T::of_usize(examples.len());
        let mut rows: Vec<T> = Vec::new();
        let mut targets = Vec::new();
        let mut local = vec![usize::MAX; n];
        let mut stacked = 0;
        for ex in examples {
            if ex.features.shape() != (n, feature_dim) {
                return Err(ShapeError(format!(
                    "example features are {}x{}, expected {n}x{feature_dim}",
                    ex.features.rows(),
                    ex.features.cols()
                ))
                .into());
            }
            check_mask(ex.labels, &ex.mask)?;
            let ax = adj.propagate(ex.features)?;
            local.fill(usize::MAX);
            let weight = match weighting {
                LossWeighting::PerLabel => T::one() / labels,
                LossWeighting::PerDay => T::one() / (days * T::of_usize(ex.mask.len())),
            };
            for &v in &ex.mask {
                let mut terms = Vec::new();
                for (u, a) in adj.row_entries(v) {
                    if local[u] == usize::MAX {
                        local[u] = stacked;
                        stacked += 1;
                        rows.extend_from_slice(ax.row(u));
                    }
                    terms.push((local[u], a));
                }
                targets.push(Target {
                    terms,
                    class: usize::from(ex.labels[v].unwrap_or(false)),
                    weight,
                });
            }
        }
        Ok(Self {
            ax: Matrix::from_vec(stacked, feature_dim, rows)?,
            targets,
        })
    }

    /// Averaged loss and gradient at `params`, as one fused pass over the
    /// stacked rows.
    fn loss_and_gradients(&self, params: &GcnParams<T>) -> Result<(T, GcnParams<T>), ShapeError> {
        let (f, h) = params.w1.shape();
        if params.w2.shape() != (h, 2) || self.ax.cols() != f {
            return Err(ShapeError(format!(
                "parameters {}x{} / {}x{} do not fit {} features",
                f,
                h,
                params.w2.rows(),
                params.w2.cols(),
                self.ax.cols()
            )));
        }
        let rows = self.ax.rows();
        let (w1, w2) = (params.w1.as_slice(), params.w2.as_slice());
        let mut z1 = vec![T::zero(); rows * h];
        let mut g = vec![T::zero(); rows * 2];
        for r in 0..rows {
            let z = &mut z1[r * h..(r + 1) * h];
            for (k, &a) in self.ax.row(r).iter().enumerate() {
                for (zj, &w) in z.iter_mut().zip(&w1[k * h..(k + 1) * h]) {
                    *zj += a * w;
                }
            }
            let (mut g0, mut g1) = (T::zero(), T::zero());
            for (j, &zj) in z.iter().enumerate() {
                let hj = zj.max(T::zero());
                g0 += hj * w2[2 * j];
                g1 += hj * w2[2 * j + 1];
            }
            g[2 * r] = g0;
            g[2 * r + 1] = g1;
        }

        let mut d_g = vec![T::zero(); rows * 2];
        let mut loss = T::zero();
        for t in &self.targets {
            let mut z = [T::zero(); 2];
            for &(r, a) in &t.terms {
                z[0] += a * g[2 * r];
                z[1] += a * g[2 * r + 1];
            }
            let max = z[0].max(z[1]);
            let (e0, e1) = ((z[0] - max).exp(), (z[1] - max).exp());
            let sum = e0 + e1;
            loss -= t.weight * (z[t.class] - max - sum.ln());
            let mut d = [e0 / sum, e1 / sum];
            d[t.class] -= T::one();
            for &(r, a) in &t.terms {
                let s = t.weight * a;
                d_g[2 * r] += s * d[0];
                d_g[2 * r + 1] += s * d[1];
            }
        }

        let mut d_w1 = vec![T::zero(); f * h];
        let mut d_w2 = vec![T::zero(); h * 2];
        let mut d_h = vec![T::zero(); h];
        for r in 0..rows {
            let (d0, d1) = (d_g[2 * r], d_g[2 * r + 1]);
            for (j, &zj) in z1[r * h..(r + 1) * h].iter().enumerate() {
                if zj > T::zero() {
                    d_w2[2 * j] += zj * d0;
                    d_w2[2 * j + 1] += zj * d1;
                    d_h[j] = d0 * w2[2 * j] + d1 * w2[2 * j + 1];
                } else {
                    d_h[j] = T::zero();
                }
            }
            for (k, &a) in self.ax.row(r).iter().enumerate() {
                for (o, &d) in d_w1[k * h..(k + 1) * h].iter_mut().zip(&d_h) {
                    *o += a * d;
                }
            }
        }
        Ok((
            loss,
            GcnParams {
                w1: Matrix::from_vec(f, h, d_w1)?,
                w2: Matrix::from_vec(h, 2, d_w2)?,
            },
        ))
    }
}

/// As [`train`], also returning the mean loss seen at the start of every
/// epoch.
pub fn train_with_history<T: Scalar>(
    seed: u64,
    adj: &NormalizedAdjacency<T>,
    examples: &[LabeledExample<'_, T>],
    hyper: &Hyperparameters,
) -> Result<(GcnParams<T>, Vec<T>), ModelError> {
    hyper.validate()?;
    if examples.is_empty() {
        return Err(ModelError::NoTrainingData);
    }
    let batch = Batch::build(adj, examples, hyper.weighting)?;
    let mut params = init_params::<T>(seed, batch.ax.cols(), hyper.hidden_dim);
    let lr = T::lit(hyper.lr);
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let (loss, grad) = batch.loss_and_gradients(&params)?;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        history.push(loss);
        params.w1.add_scaled(-lr, &grad.w1)?;
        params.w2.add_scaled(-lr, &grad.w2)?;
    }
    Ok((params, history))
}
