//! Spectral cluster/classifier disagreement for binary tasks.
//!
//! The subsample is bipartitioned by the standard normalized-cut relaxation:
//! RBF similarity matrix (median-distance bandwidth, zero diagonal), the
//! second eigenvector of the symmetric normalized Laplacian via deflated
//! power iteration with a fixed pseudo-random start, then an exact 1-d
//! two-means split of that eigenvector. The metric is the smaller of the two
//! cluster-to-class disagreement fractions, so swapping cluster labels
//! cannot change it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, IterationRecord};
use crate::error::{Error, Result};

const POWER_ITERATIONS: usize = 200;
const START_SEED: u64 = 0x5ec0_4d2e;

/// Disagreement between the spectral bipartition of the subsample and the
/// classifier's predictions recorded for it.
pub fn ssncut_metric(rec: &IterationRecord, dataset: &Dataset) -> Result<f64> {
    if dataset.num_classes() != 2 {
        return Err(Error::InvalidArgument(
            "spectral agreement is defined for binary tasks only".into(),
        ));
    }
    let rows = &rec.subsample_indices;
    let n = rows.len();
    if n < 2 {
        return Err(Error::EmptyInput(
            "spectral bipartition needs at least 2 subsample rows".into(),
        ));
    }

    let weights = similarity_matrix(dataset, rows);
    let clusters = bipartition(&weights, n);

    // predictions as 0/1 by class position
    let negative = dataset.classes[0];
    let preds: Vec<u8> = rec
        .subsample_predictions
        .iter()
        .map(|&p| u8::from(p != negative))
        .collect();

    let direct = clusters.iter().zip(&preds).filter(|(c, p)| c != p).count();
    let flipped = n - direct;
    Ok(direct.min(flipped) as f64 / n as f64)
}

/// Dense RBF similarity over the given dataset rows with the median pairwise
/// distance as bandwidth and a zero diagonal.
fn similarity_matrix(dataset: &Dataset, rows: &[usize]) -> Vec<f64> {
    let n = rows.len();
    let mut sq_dists = vec![0.0; n * n];
    let mut all: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2 = dataset.features.row_sq_dist(rows[i], rows[j]);
            sq_dists[i * n + j] = d2;
            sq_dists[j * n + i] = d2;
            all.push(d2);
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = all.len() / 2;
    let median_sq = if all.len().is_multiple_of(2) {
        (all[mid - 1] + all[mid]) / 2.0
    } else {
        all[mid]
    };
    let sigma_sq = if median_sq > 0.0 { median_sq } else { 1.0 };
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i * n + j] = (-sq_dists[i * n + j] / (2.0 * sigma_sq)).exp();
            }
        }
    }
    w
}

/// Second eigenvector of the normalized Laplacian followed by an exact 1-d
/// two-means split. Returns 0/1 cluster assignments.
fn bipartition(weights: &[f64], n: usize) -> Vec<u8> {
    let degrees: Vec<f64> = (0..n)
        .map(|i| weights[i * n..(i + 1) * n].iter().sum())
        .collect();
    let inv_sqrt_deg: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();

    // leading eigenvector of M = I + D^{-1/2} W D^{-1/2}
    let mut v1: Vec<f64> = degrees.iter().map(|d| d.max(0.0).sqrt()).collect();
    normalize(&mut v1);

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    orthogonalize(&mut x, &v1);
    normalize(&mut x);
    let mut y = vec![0.0; n];
    for _ in 0..POWER_ITERATIONS {
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..n {
                acc += inv_sqrt_deg[i] * weights[i * n + j] * inv_sqrt_deg[j] * x[j];
            }
            y[i] = acc;
        }
        std::mem::swap(&mut x, &mut y);
        orthogonalize(&mut x, &v1);
        normalize(&mut x);
    }

    two_means_1d(&x)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        // degenerate direction; fall back to a fixed unit vector
        v[0] = 1.0;
    }
}

fn orthogonalize(v: &mut [f64], against: &[f64]) {
    let dot: f64 = v.iter().zip(against).map(|(a, b)| a * b).sum();
    for (x, &g) in v.iter_mut().zip(against) {
        *x -= dot * g;
    }
}

/// Exact two-cluster 1-d k-means: sorts the values and scans every split for
/// the minimum within-cluster sum of squares.
fn two_means_1d(values: &[f64]) -> Vec<u8> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |lo: usize, hi: usize| {
        // sum of squared deviations of sorted[lo..hi]
        let count = (hi - lo) as f64;
        let sum = prefix[hi] - prefix[lo];
        (prefix_sq[hi] - prefix_sq[lo]) - sum * sum / count
    };
    let mut best_split = 1;
    let mut best_sse = f64::INFINITY;
    for split in 1..n {
        let total = sse(0, split) + sse(split, n);
        if total < best_sse {
            best_sse = total;
            best_split = split;
        }
    }
    let mut clusters = vec![0u8; n];
    for (pos, &idx) in order.iter().enumerate() {
        clusters[idx] = u8::from(pos >= best_split);
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureMatrix, IterationRecord};

    fn two_blob_dataset(gap: f64) -> Dataset {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let j = (i as f64 - 4.5) * 0.1;
            values.extend_from_slice(&[j, j * 0.5]);
            labels.push(0u32);
            values.extend_from_slice(&[gap + j, -j * 0.5]);
            labels.push(1);
        }
        Dataset::new(
            "blobs",
            FeatureMatrix::dense(20, 2, values).unwrap(),
            labels,
        )
        .unwrap()
    }

    fn record_with(preds: Vec<u32>) -> IterationRecord {
        IterationRecord {
            round: 0,
            labels_used: 10,
            selected: vec![],
            subsample_indices: (0..preds.len()).collect(),
            subsample_posteriors: vec![vec![0.5, 0.5]; preds.len()],
            subsample_predictions: preds,
            stopset_predictions: vec![],
            test_accuracy: 0.5,
        }
    }

    #[test]
    fn matching_clusters_score_zero() {
        let ds = two_blob_dataset(20.0);
        let rec = record_with(ds.labels.clone());
        assert_eq!(ssncut_metric(&rec, &ds).unwrap(), 0.0);
    }

    #[test]
    fn inverted_labels_also_score_zero() {
        let ds = two_blob_dataset(20.0);
        let flipped: Vec<u32> = ds.labels.iter().map(|&l| 1 - l).collect();
        let rec = record_with(flipped);
        assert_eq!(ssncut_metric(&rec, &ds).unwrap(), 0.0);
    }

    #[test]
    fn single_point_across_the_gap_scores_one_over_n() {
        let ds = two_blob_dataset(20.0);
        let mut preds = ds.labels.clone();
        preds[0] = 1; // classifier moves one blob-0 point across
        let rec = record_with(preds);
        let got = ssncut_metric(&rec, &ds).unwrap();
        assert!((got - 1.0 / 20.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn rejects_non_binary_and_tiny_subsamples() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3u32 {
            for i in 0..4 {
                values.extend_from_slice(&[c as f64 * 10.0 + i as f64 * 0.1, 0.0]);
                labels.push(c);
            }
        }
        let ds3 = Dataset::new(
            "three",
            FeatureMatrix::dense(12, 2, values).unwrap(),
            labels,
        )
        .unwrap();
        let rec = record_with(vec![0; 12]);
        assert!(ssncut_metric(&rec, &ds3).is_err());

        let ds = two_blob_dataset(5.0);
        let mut tiny = record_with(vec![0]);
        tiny.subsample_indices = vec![0];
        assert!(ssncut_metric(&tiny, &ds).is_err());
    }

    #[test]
    fn metric_is_deterministic() {
        let ds = two_blob_dataset(3.0);
        let rec = record_with(ds.labels.clone());
        let a = ssncut_metric(&rec, &ds).unwrap();
        let b = ssncut_metric(&rec, &ds).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
