//! Ranked batch-mode uncertainty sampling.
//!
//! Each round's batch is built greedily: candidate `x` scores
//! `alpha * (1 - maxsim(x, L ∪ S)) + (1 - alpha) * u(x)` where `u = 1 -
//! confidence`, `maxsim` is the largest similarity to the labeled pool plus
//! the already-selected set `S`, and `alpha = r / (r + |L ∪ S|)` with `r`
//! the number of candidates still unselected. The best-scoring candidate
//! joins `S` before the next pass; ties break toward the lowest row index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::learners::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    /// Cosine similarity clamped to [0, 1]; suited to sparse data.
    Cosine,
    /// RBF of euclidean distance with a median-pairwise-distance bandwidth.
    EuclideanRbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub batch_size: usize,
    pub similarity: Similarity,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            batch_size: 10,
            similarity: Similarity::EuclideanRbf,
        }
    }
}

/// Pairwise similarity with precomputable state (the RBF bandwidth).
struct SimilarityFn<'a> {
    features: &'a FeatureMatrix,
    kind: Similarity,
    /// RBF bandwidth sigma; unused for cosine.
    bandwidth: f64,
}

impl SimilarityFn<'_> {
    fn eval(&self, a: usize, b: usize) -> f64 {
        match self.kind {
            Similarity::Cosine => {
                let na = self.features.row_norm_sq(a);
                let nb = self.features.row_norm_sq(b);
                if na == 0.0 || nb == 0.0 {
                    return 0.0;
                }
                (self.features.row_dot(a, b) / (na * nb).sqrt()).clamp(0.0, 1.0)
            }
            Similarity::EuclideanRbf => {
                let d2 = self.features.row_sq_dist(a, b);
                (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
        }
    }
}

/// Median pairwise euclidean distance over the candidate rows. Large
/// candidate sets are subsampled (seeded) before the quadratic scan.
fn median_distance(features: &FeatureMatrix, candidates: &[usize], seed: u64) -> f64 {
    const CAP: usize = 512;
    let mut rows: Vec<usize> = candidates.to_vec();
    if rows.len() > CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = rand::seq::index::sample(&mut rng, rows.len(), CAP);
        rows = picked.iter().map(|i| candidates[i]).collect();
        rows.sort_unstable();
    }
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            dists.push(features.row_sq_dist(rows[i], rows[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        (dists[mid - 1] + dists[mid]) / 2.0
    } else {
        dists[mid]
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Selects `min(batch_size, |candidates|)` rows from `candidates`, ordered by
/// the iterative diversity/uncertainty score. `labeled` is the current
/// labeled pool; `seed` only affects the bandwidth subsampling on very large
/// candidate sets.
pub fn rank_batch(
    model: &TrainedModel,
    features: &FeatureMatrix,
    candidates: &[usize],
    labeled: &[usize],
    config: &QueryConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    let confidences = model.confidence(features, candidates)?;
    let uncertainty: Vec<f64> = confidences.iter().map(|c| 1.0 - c).collect();
    rank_with_uncertainty(
        features,
        candidates,
        labeled,
        &uncertainty,
        config,
        seed,
        None,
    )
}

/// Core selection loop with the uncertainty vector supplied directly;
/// `alpha_override` pins the diversity blend for testing.
pub(crate) fn rank_with_uncertainty(
    features: &FeatureMatrix,
    candidates: &[usize],
    labeled: &[usize],
    uncertainty: &[f64],
    config: &QueryConfig,
    seed: u64,
    alpha_override: Option<f64>,
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("query candidates".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let sim = SimilarityFn {
        features,
        kind: config.similarity,
        bandwidth: match config.similarity {
            Similarity::Cosine => 1.0,
            Similarity::EuclideanRbf => median_distance(features, candidates, seed),
        },
    };

    let n = candidates.len();
    // running max similarity of each candidate to L ∪ selected
    let mut maxsim: Vec<f64> = candidates
        .iter()
        .map(|&c| labeled.iter().map(|&l| sim.eval(c, l)).fold(0.0, f64::max))
        .collect();
    let mut taken = vec![false; n];
    let mut picked = Vec::with_capacity(config.batch_size.min(n));

    while picked.len() < config.batch_size.min(n) {
        let remaining = n - picked.len();
        let pool = labeled.len() + picked.len();
        let alpha = alpha_override.unwrap_or(remaining as f64 / (remaining as f64 + pool as f64));
        let mut best: Option<usize> = None;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let score = alpha * (1.0 - maxsim[i]) + (1.0 - alpha) * uncertainty[i];
            let better = score > best_score
                || (score == best_score && best.is_some_and(|b| candidates[i] < candidates[b]));
            if better {
                best = Some(i);
                best_score = score;
            }
        }
        let chosen = best.expect("nonempty remainder");
        taken[chosen] = true;
        picked.push(candidates[chosen]);
        for i in 0..n {
            if !taken[i] {
                maxsim[i] = maxsim[i].max(sim.eval(candidates[i], candidates[chosen]));
            }
        }
    }
    Ok(picked)
}
