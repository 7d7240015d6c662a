//! One-vs-rest linear classifier with L2-regularized logistic loss, trained
//! by deterministic full-batch gradient descent from a zero initialization.
//! Posteriors come from a softmax over the per-class decision values;
//! confidence is a monotone map of the top-two decision margin into [0, 1].

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;

use super::{softmax, LearnerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<u32>,
    pub dim: usize,
    /// One weight vector per class, bias appended as the last entry.
    pub weights: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Training copy of the labeled rows, standardized column-wise. Dense data is
/// centered and scaled; sparse data is scaled only, which preserves sparsity.
struct TrainingRows {
    rows: Vec<Vec<(usize, f64)>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl TrainingRows {
    fn standardize(features: &FeatureMatrix, rows: &[usize]) -> TrainingRows {
        let d = features.cols();
        let n = rows.len() as f64;
        let center = matches!(features, FeatureMatrix::Dense { .. });
        let mut mean = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for &r in rows {
            features.for_each_nonzero(r, |j, x| {
                mean[j] += x;
                sq[j] += x * x;
            });
        }
        mean.iter_mut().for_each(|m| *m /= n);
        if !center {
            mean.iter_mut().for_each(|m| *m = 0.0);
        }
        let scale: Vec<f64> = sq
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| {
                let var = (s / n - m * m).max(0.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let rows = rows
            .iter()
            .map(|&r| {
                if center {
                    features
                        .row_to_dense(r)
                        .into_iter()
                        .enumerate()
                        .map(|(j, x)| (j, (x - mean[j]) / scale[j]))
                        .collect()
                } else {
                    let mut out = Vec::new();
                    features.for_each_nonzero(r, |j, x| out.push((j, x / scale[j])));
                    out
                }
            })
            .collect();
        TrainingRows { rows, mean, scale }
    }
}

pub(super) fn fit(
    spec: &LearnerSpec,
    features: &FeatureMatrix,
    rows: &[usize],
    classes: &[u32],
    positions: &[usize],
) -> LinearModel {
    let d = features.cols();
    let n = rows.len() as f64;
    let reg = spec.params.linear_reg;
    let training = TrainingRows::standardize(features, rows);

    // Fixed step from a Lipschitz bound of the logistic gradient over the
    // standardized data (bias included).
    let max_sq_norm = training
        .rows
        .iter()
        .map(|row| row.iter().map(|(_, x)| x * x).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    let step = spec.params.linear_lr / (0.25 * max_sq_norm + reg).max(1e-12);

    let mut weights = vec![vec![0.0; d + 1]; classes.len()];
    let mut grad = vec![0.0; d + 1];
    for (c, w) in weights.iter_mut().enumerate() {
        for _ in 0..spec.params.linear_iters {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (row, &pos) in training.rows.iter().zip(positions) {
                let target = if pos == c { 1.0 } else { 0.0 };
                let z = row.iter().map(|&(j, x)| w[j] * x).sum::<f64>() + w[d];
                let residual = (sigmoid(z) - target) / n;
                for &(j, x) in row {
                    grad[j] += residual * x;
                }
                grad[d] += residual;
            }
            for j in 0..d {
                grad[j] += reg * w[j];
            }
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj -= step * gj;
            }
        }
    }

    // fold the standardization back into raw-space weights
    for w in &mut weights {
        let mut bias_shift = 0.0;
        for j in 0..d {
            w[j] /= training.scale[j];
            bias_shift += w[j] * training.mean[j];
        }
        w[d] -= bias_shift;
    }
    LinearModel {
        classes: classes.to_vec(),
        dim: d,
        weights,
    }
}

impl LinearModel {
    pub fn decision_values(&self, features: &FeatureMatrix, row: usize) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| features.dot_row(row, &w[..self.dim]) + w[self.dim])
            .collect()
    }

    pub fn posterior_row(&self, features: &FeatureMatrix, row: usize) -> Vec<f64> {
        softmax(&self.decision_values(features, row))
    }

    /// `2*sigmoid(margin) - 1` of the gap between the two largest decision
    /// values: 0 on the decision boundary, approaching 1 deep inside a class.
    pub fn confidence_row(&self, features: &FeatureMatrix, row: usize) -> f64 {
        let values = self.decision_values(features, row);
        let mut top = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &v in &values {
            if v > top {
                second = top;
                top = v;
            } else if v > second {
                second = v;
            }
        }
        2.0 * sigmoid(top - second) - 1.0
    }
}
