//! Single-hidden-layer neural network: tanh hidden activation, softmax
//! output, cross-entropy loss with L2 weight decay, trained by full-batch
//! gradient descent from a seeded Xavier initialization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;

use super::{softmax, LearnerSpec};

/// Layer sizes; fixes the flat parameter layout `[w1, b1, w2, b2]` with `w1`
/// of shape `hidden x dim` and `w2` of shape `classes x hidden`, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpShape {
    pub fn param_count(&self) -> usize {
        self.hidden * self.dim + self.hidden + self.classes * self.hidden + self.classes
    }

    fn w1(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.dim
    }

    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.dim;
        s..s + self.hidden
    }

    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.dim + self.hidden;
        s..s + self.classes * self.hidden
    }

    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.dim + self.hidden + self.classes * self.hidden;
        s..s + self.classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub classes: Vec<u32>,
    pub shape: MlpShape,
    pub params: Vec<f64>,
}

fn forward_hidden(
    shape: &MlpShape,
    params: &[f64],
    features: &FeatureMatrix,
    row: usize,
) -> Vec<f64> {
    let w1 = &params[shape.w1()];
    let b1 = &params[shape.b1()];
    let mut a1 = b1.to_vec();
    features.for_each_nonzero(row, |k, x| {
        for j in 0..shape.hidden {
            a1[j] += w1[j * shape.dim + k] * x;
        }
    });
    a1.iter_mut().for_each(|z| *z = z.tanh());
    a1
}

fn output_scores(shape: &MlpShape, params: &[f64], a1: &[f64]) -> Vec<f64> {
    let w2 = &params[shape.w2()];
    let b2 = &params[shape.b2()];
    (0..shape.classes)
        .map(|c| {
            b2[c]
                + w2[c * shape.hidden..(c + 1) * shape.hidden]
                    .iter()
                    .zip(a1)
                    .map(|(w, a)| w * a)
                    .sum::<f64>()
        })
        .collect()
}

/// Mean cross-entropy loss plus `reg/2 * ||weights||^2` and its analytic
/// gradient over the flat parameter vector. `targets` are class positions
/// aligned with `rows`. Public so the gradient can be checked against finite
/// differences.
pub fn mlp_loss_and_grad(
    shape: &MlpShape,
    params: &[f64],
    features: &FeatureMatrix,
    rows: &[usize],
    targets: &[usize],
    reg: f64,
) -> (f64, Vec<f64>) {
    assert_eq!(params.len(), shape.param_count());
    assert_eq!(rows.len(), targets.len());
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    let w2 = &params[shape.w2()];

    for (&row, &target) in rows.iter().zip(targets) {
        let a1 = forward_hidden(shape, params, features, row);
        let probs = softmax(&output_scores(shape, params, &a1));
        loss -= probs[target].max(1e-300).ln() / n;

        // output layer
        let mut dz2: Vec<f64> = probs;
        dz2[target] -= 1.0;
        dz2.iter_mut().for_each(|d| *d /= n);
        let g_w2_start = shape.w2().start;
        let g_b2_start = shape.b2().start;
        for c in 0..shape.classes {
            for j in 0..shape.hidden {
                grad[g_w2_start + c * shape.hidden + j] += dz2[c] * a1[j];
            }
            grad[g_b2_start + c] += dz2[c];
        }

        // hidden layer
        let mut dz1 = vec![0.0; shape.hidden];
        for j in 0..shape.hidden {
            let da: f64 = (0..shape.classes)
                .map(|c| w2[c * shape.hidden + j] * dz2[c])
                .sum();
            dz1[j] = da * (1.0 - a1[j] * a1[j]);
        }
        let g_b1_start = shape.b1().start;
        features.for_each_nonzero(row, |k, x| {
            for j in 0..shape.hidden {
                grad[j * shape.dim + k] += dz1[j] * x;
            }
        });
        for j in 0..shape.hidden {
            grad[g_b1_start + j] += dz1[j];
        }
    }

    // weight decay on w1 and w2, not biases
    for r in [shape.w1(), shape.w2()] {
        for i in r {
            loss += 0.5 * reg * params[i] * params[i];
            grad[i] += reg * params[i];
        }
    }
    (loss, grad)
}

/// Seeded Xavier-uniform initialization of the flat parameter vector.
pub fn init_params(shape: &MlpShape, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; shape.param_count()];
    let s1 = (6.0 / (shape.dim + shape.hidden) as f64).sqrt();
    for i in shape.w1() {
        params[i] = rng.gen_range(-s1..s1);
    }
    let s2 = (6.0 / (shape.hidden + shape.classes) as f64).sqrt();
    for i in shape.w2() {
        params[i] = rng.gen_range(-s2..s2);
    }
    params
}

pub(super) fn fit(
    spec: &LearnerSpec,
    features: &FeatureMatrix,
    rows: &[usize],
    classes: &[u32],
    positions: &[usize],
) -> MlpModel {
    let shape = MlpShape {
        dim: features.cols(),
        hidden: spec.params.hidden.max(1),
        classes: classes.len(),
    };
    let mut params = init_params(&shape, spec.seed);
    for _ in 0..spec.params.epochs {
        let (_, grad) = mlp_loss_and_grad(
            &shape,
            &params,
            features,
            rows,
            positions,
            spec.params.mlp_reg,
        );
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= spec.params.mlp_lr * g;
        }
    }
    MlpModel {
        classes: classes.to_vec(),
        shape,
        params,
    }
}

impl MlpModel {
    pub fn posterior_row(&self, features: &FeatureMatrix, row: usize) -> Vec<f64> {
        let a1 = forward_hidden(&self.shape, &self.params, features, row);
        softmax(&output_scores(&self.shape, &self.params, &a1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit as fit_model, LearnerKind};

    #[test]
    fn uniform_logits_give_uniform_confidence() {
        // all-zero parameters produce equal scores for every class
        let shape = MlpShape {
            dim: 3,
            hidden: 4,
            classes: 5,
        };
        let model = MlpModel {
            classes: vec![0, 1, 2, 3, 4],
            shape,
            params: vec![0.0; shape.param_count()],
        };
        let x = FeatureMatrix::dense(1, 3, vec![0.4, -0.2, 1.0]).unwrap();
        let p = model.posterior_row(&x, 0);
        for v in &p {
            assert!((v - 0.2).abs() < 1e-12);
        }
        let wrapped = crate::learners::TrainedModel::Mlp(model);
        let c = wrapped.confidence(&x, &[0]).unwrap();
        assert!((c[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..5 {
            let shape = MlpShape {
                dim: 3,
                hidden: 4,
                classes: 3,
            };
            let n = 6;
            let values: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let features = FeatureMatrix::dense(n, 3, values).unwrap();
            let rows: Vec<usize> = (0..n).collect();
            let targets: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let params = init_params(&shape, 100 + case);
            let (_, grad) = mlp_loss_and_grad(&shape, &params, &features, &rows, &targets, 1e-3);
            let eps = 1e-5;
            for i in 0..params.len() {
                let mut plus = params.clone();
                plus[i] += eps;
                let mut minus = params.clone();
                minus[i] -= eps;
                let (lp, _) = mlp_loss_and_grad(&shape, &plus, &features, &rows, &targets, 1e-3);
                let (lm, _) = mlp_loss_and_grad(&shape, &minus, &features, &rows, &targets, 1e-3);
                let fd = (lp - lm) / (2.0 * eps);
                let scale = grad[i].abs().max(fd.abs()).max(1.0);
                assert!(
                    (grad[i] - fd).abs() <= 1e-4 * scale,
                    "param {i}: analytic {} vs fd {}",
                    grad[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn mlp_trains_on_small_separable_data() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let j = (i % 5) as f64 * 0.1;
            values.extend_from_slice(&[-1.0 - j, 0.5]);
            labels.push(0u32);
            values.extend_from_slice(&[1.0 + j, -0.5]);
            labels.push(1);
        }
        let features = FeatureMatrix::dense(40, 2, values).unwrap();
        let rows: Vec<usize> = (0..40).collect();
        let mut spec = LearnerSpec::new(LearnerKind::Mlp, 1);
        spec.params.hidden = 8;
        spec.params.epochs = 150;
        let model = fit_model(&spec, &features, &rows, &labels).unwrap();
        let preds = model.predict(&features, &rows).unwrap();
        let acc = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        assert!(acc >= 39, "accuracy {acc}/40");
    }
}
