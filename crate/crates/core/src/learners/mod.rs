//! Desk-scale probabilistic classifiers.
//!
//! Three learner families share one contract: a posterior distribution per
//! instance (rows nonnegative, summing to 1), a prediction equal to the
//! posterior argmax with ties broken by lowest class id, and a confidence
//! score in [0, 1]. Training is deterministic given the spec's seed, so
//! repeated fits serialize byte-identically. Hyperparameters all carry
//! defaults; none are tuned.

mod forest;
mod linear;
mod mlp;

pub use forest::ForestModel;
pub use linear::LinearModel;
pub use mlp::{init_params as mlp_init_params, mlp_loss_and_grad, MlpModel, MlpShape};

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Model format version for serialized models.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Linear,
    Forest,
    Mlp,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Linear => "linear",
            LearnerKind::Forest => "forest",
            LearnerKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<LearnerKind> {
        match s {
            "linear" => Some(LearnerKind::Linear),
            "forest" => Some(LearnerKind::Forest),
            "mlp" => Some(LearnerKind::Mlp),
            _ => None,
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for every learner family, all defaulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerParams {
    /// L2 regularization strength of the linear one-vs-rest learner.
    pub linear_reg: f64,
    /// Full-batch gradient-descent steps for the linear learner.
    pub linear_iters: usize,
    /// Base learning rate of the linear learner (scaled by a Lipschitz bound).
    pub linear_lr: f64,
    /// Number of trees in the forest.
    pub trees: usize,
    /// Maximum tree depth; 0 grows until leaves are pure.
    pub max_depth: usize,
    /// Hidden-layer width of the neural network.
    pub hidden: usize,
    /// Training epochs of the neural network.
    pub epochs: usize,
    /// Learning rate of the neural network.
    pub mlp_lr: f64,
    /// L2 regularization of the neural network weights.
    pub mlp_reg: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            linear_reg: 1e-4,
            linear_iters: 300,
            linear_lr: 1.0,
            trees: 100,
            max_depth: 0,
            hidden: 64,
            epochs: 200,
            mlp_lr: 0.5,
            mlp_reg: 1e-4,
        }
    }
}

/// A learner family plus its seed and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: LearnerParams,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        LearnerSpec {
            kind,
            seed,
            params: LearnerParams::default(),
        }
    }

    /// Copy of the spec with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        LearnerSpec {
            seed,
            ..self.clone()
        }
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Linear(LinearModel),
    Forest(ForestModel),
    Mlp(MlpModel),
    /// Constant model returned when training data held a single class.
    Degenerate {
        class: u32,
        dim: usize,
    },
}

impl TrainedModel {
    pub fn classes(&self) -> &[u32] {
        match self {
            TrainedModel::Linear(m) => &m.classes,
            TrainedModel::Forest(m) => &m.classes,
            TrainedModel::Mlp(m) => &m.classes,
            TrainedModel::Degenerate { class, .. } => std::slice::from_ref(class),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Linear(m) => m.dim,
            TrainedModel::Forest(m) => m.dim,
            TrainedModel::Mlp(m) => m.shape.dim,
            TrainedModel::Degenerate { dim, .. } => *dim,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, TrainedModel::Degenerate { .. })
    }

    fn check_dim(&self, features: &FeatureMatrix) -> Result<()> {
        if features.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: features.cols(),
            });
        }
        Ok(())
    }

    /// Class posterior for one row; columns follow `classes()` order.
    pub fn posterior_row(&self, features: &FeatureMatrix, row: usize) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(match self {
            TrainedModel::Linear(m) => m.posterior_row(features, row),
            TrainedModel::Forest(m) => m.posterior_row(features, row),
            TrainedModel::Mlp(m) => m.posterior_row(features, row),
            TrainedModel::Degenerate { .. } => vec![1.0],
        })
    }

    /// Posterior matrix for a set of rows.
    pub fn posterior(&self, features: &FeatureMatrix, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(features)?;
        rows.iter()
            .map(|&r| self.posterior_row(features, r))
            .collect()
    }

    /// Predicted class ids: posterior argmax, ties to the lowest class id.
    pub fn predict(&self, features: &FeatureMatrix, rows: &[usize]) -> Result<Vec<u32>> {
        self.check_dim(features)?;
        rows.iter()
            .map(|&r| {
                let p = self.posterior_row(features, r)?;
                Ok(self.classes()[argmax(&p)])
            })
            .collect()
    }

    /// Per-row confidence in [0, 1]. Linear models use the decision margin,
    /// forest and network models the predicted class's posterior.
    pub fn confidence(&self, features: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(match self {
            TrainedModel::Linear(m) => rows
                .iter()
                .map(|&r| m.confidence_row(features, r))
                .collect(),
            TrainedModel::Forest(m) => rows
                .iter()
                .map(|&r| max_value(&m.posterior_row(features, r)))
                .collect(),
            TrainedModel::Mlp(m) => rows
                .iter()
                .map(|&r| max_value(&m.posterior_row(features, r)))
                .collect(),
            TrainedModel::Degenerate { .. } => vec![1.0; rows.len()],
        })
    }

    /// Version-tagged JSON form, for trace debugging.
    pub fn to_versioned_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_json::json!({
            "version": MODEL_VERSION,
            "model": self,
        }))?)
    }

    pub fn from_versioned_json(s: &str) -> Result<TrainedModel> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_VERSION {
            return Err(Error::TraceVersion {
                expected: MODEL_VERSION,
                got: version,
            });
        }
        Ok(serde_json::from_value(v["model"].clone())?)
    }
}

/// Index of the largest value; the first maximum wins, which breaks class
/// ties toward the lowest class id.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Numerically stable softmax.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = max_value(scores);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Sorted distinct class ids plus per-row class positions.
pub(crate) fn class_index(labels: &[u32]) -> (Vec<u32>, Vec<usize>) {
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let positions = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    (classes, positions)
}

/// Trains a classifier on the given rows of `features` with aligned `labels`.
///
/// With a single distinct label a flagged constant model is returned rather
/// than an error, so callers probing tiny labeled pools keep a usable model.
pub fn fit(
    spec: &LearnerSpec,
    features: &FeatureMatrix,
    rows: &[usize],
    labels: &[u32],
) -> Result<TrainedModel> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("training rows".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "rows ({}) and labels ({}) differ in length",
            rows.len(),
            labels.len()
        )));
    }
    if rows.iter().any(|&r| r >= features.rows()) {
        return Err(Error::InvalidArgument("training row out of range".into()));
    }
    let (classes, positions) = class_index(labels);
    if classes.len() < 2 {
        return Ok(TrainedModel::Degenerate {
            class: classes[0],
            dim: features.cols(),
        });
    }
    match spec.kind {
        LearnerKind::Linear => Ok(TrainedModel::Linear(linear::fit(
            spec, features, rows, &classes, &positions,
        ))),
        LearnerKind::Forest => Ok(TrainedModel::Forest(forest::fit(
            spec, features, rows, &classes, &positions,
        ))),
        LearnerKind::Mlp => Ok(TrainedModel::Mlp(mlp::fit(
            spec, features, rows, &classes, &positions,
        ))),
    }
}
