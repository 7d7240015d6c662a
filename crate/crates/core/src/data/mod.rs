//! Core value types: datasets, feature matrices, and pool partitions.
//!
//! A [`Dataset`] is immutable after construction. The active-learning state is
//! carried by [`PoolState`], which partitions the dataset's row indices into
//! labeled, unlabeled, and test sets plus an evaluation subsample. All index
//! sets are kept sorted.

mod trace;

pub use trace::{
    deserialize_trace, serialize_trace, IterationRecord, RunTrace, SelectedInstance, TraceConfig,
    TraceWriter, TRACE_VERSION,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major feature storage, either dense or sparse (CSR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureMatrix {
    Dense {
        rows: usize,
        cols: usize,
        values: Vec<f64>,
    },
    Sparse {
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

impl FeatureMatrix {
    pub fn dense(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "dense matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(FeatureMatrix::Dense { rows, cols, values })
    }

    /// Builds a CSR matrix. Column indices must be strictly increasing within
    /// each row and smaller than `cols`.
    pub fn sparse(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 || *indptr.last().unwrap() != indices.len() {
            return Err(Error::InvalidArgument("malformed CSR indptr".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::InvalidArgument(
                "CSR indices/values length mismatch".into(),
            ));
        }
        for r in 0..rows {
            if indptr[r] > indptr[r + 1] {
                return Err(Error::InvalidArgument("CSR indptr not monotone".into()));
            }
            let row = &indices[indptr[r]..indptr[r + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidArgument(format!(
                        "row {r}: column indices not strictly increasing"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= cols {
                    return Err(Error::InvalidArgument(format!(
                        "row {r}: column index {last} out of range"
                    )));
                }
            }
        }
        Ok(FeatureMatrix::Sparse {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        match self {
            FeatureMatrix::Dense { rows, .. } | FeatureMatrix::Sparse { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            FeatureMatrix::Dense { cols, .. } | FeatureMatrix::Sparse { cols, .. } => *cols,
        }
    }

    /// Visits the nonzero entries of one row as `(column, value)`.
    pub fn for_each_nonzero<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        match self {
            FeatureMatrix::Dense { cols, values, .. } => {
                for (c, &v) in values[row * cols..(row + 1) * cols].iter().enumerate() {
                    if v != 0.0 {
                        f(c, v);
                    }
                }
            }
            FeatureMatrix::Sparse {
                indptr,
                indices,
                values,
                ..
            } => {
                for k in indptr[row]..indptr[row + 1] {
                    f(indices[k], values[k]);
                }
            }
        }
    }

    /// Dot product of a row with a dense weight vector of length `cols`.
    pub fn dot_row(&self, row: usize, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.cols());
        match self {
            FeatureMatrix::Dense { cols, values, .. } => values[row * cols..(row + 1) * cols]
                .iter()
                .zip(w)
                .map(|(a, b)| a * b)
                .sum(),
            FeatureMatrix::Sparse {
                indptr,
                indices,
                values,
                ..
            } => (indptr[row]..indptr[row + 1])
                .map(|k| values[k] * w[indices[k]])
                .sum(),
        }
    }

    /// Dot product of two rows of the same matrix.
    pub fn row_dot(&self, a: usize, b: usize) -> f64 {
        match self {
            FeatureMatrix::Dense { cols, values, .. } => {
                let ra = &values[a * cols..(a + 1) * cols];
                let rb = &values[b * cols..(b + 1) * cols];
                ra.iter().zip(rb).map(|(x, y)| x * y).sum()
            }
            FeatureMatrix::Sparse {
                indptr,
                indices,
                values,
                ..
            } => {
                // merge walk over the two sorted index ranges
                let (mut i, ia_end) = (indptr[a], indptr[a + 1]);
                let (mut j, ib_end) = (indptr[b], indptr[b + 1]);
                let mut acc = 0.0;
                while i < ia_end && j < ib_end {
                    match indices[i].cmp(&indices[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            acc += values[i] * values[j];
                            i += 1;
                            j += 1;
                        }
                    }
                }
                acc
            }
        }
    }

    pub fn row_norm_sq(&self, row: usize) -> f64 {
        self.row_dot(row, row)
    }

    /// Squared euclidean distance between two rows.
    pub fn row_sq_dist(&self, a: usize, b: usize) -> f64 {
        (self.row_norm_sq(a) + self.row_norm_sq(b) - 2.0 * self.row_dot(a, b)).max(0.0)
    }

    /// Materializes one row as a dense vector.
    pub fn row_to_dense(&self, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.for_each_nonzero(row, |c, v| out[c] = v);
        out
    }
}

/// A named dataset with features, integer class labels, and the ordered class
/// id set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: FeatureMatrix,
    pub labels: Vec<u32>,
    /// Sorted, distinct class ids; every label is a member.
    pub classes: Vec<u32>,
    /// Original label names when ingestion remapped them to dense ids.
    pub class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: FeatureMatrix, labels: Vec<u32>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "feature rows ({}) != labels ({})",
                features.rows(),
                labels.len()
            )));
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::InvalidDataset(
                "a dataset needs at least 2 classes".into(),
            ));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            classes,
            class_names: None,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Position of a class id within the ordered class set.
    pub fn class_position(&self, class: u32) -> Option<usize> {
        self.classes.binary_search(&class).ok()
    }

    /// Returns a row-subsampled copy (uniform without replacement, seeded).
    pub fn subsample_rows(&self, seed: u64, count: usize) -> Result<Dataset> {
        if count == 0 {
            return Err(Error::InvalidArgument("row subsample of size 0".into()));
        }
        let n = self.num_rows();
        let take = count.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        rows.truncate(take);
        rows.sort_unstable();
        let labels: Vec<u32> = rows.iter().map(|&r| self.labels[r]).collect();
        let features = match &self.features {
            FeatureMatrix::Dense { cols, values, .. } => {
                let mut out = Vec::with_capacity(take * cols);
                for &r in &rows {
                    out.extend_from_slice(&values[r * cols..(r + 1) * cols]);
                }
                FeatureMatrix::dense(take, *cols, out)?
            }
            FeatureMatrix::Sparse {
                cols,
                indptr,
                indices,
                values,
                ..
            } => {
                let mut new_ptr = Vec::with_capacity(take + 1);
                let mut new_idx = Vec::new();
                let mut new_val = Vec::new();
                new_ptr.push(0);
                for &r in &rows {
                    new_idx.extend_from_slice(&indices[indptr[r]..indptr[r + 1]]);
                    new_val.extend_from_slice(&values[indptr[r]..indptr[r + 1]]);
                    new_ptr.push(new_idx.len());
                }
                FeatureMatrix::sparse(take, *cols, new_ptr, new_idx, new_val)?
            }
        };
        let mut out = Dataset::new(self.name.clone(), features, labels)?;
        out.class_names = self.class_names.clone();
        Ok(out)
    }
}

/// Partition of a dataset's rows into labeled, unlabeled, and test index
/// sets, plus the evaluation subsample drawn from the unlabeled pool. All
/// vectors are sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub num_rows: usize,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub test: Vec<usize>,
    pub subsample: Vec<usize>,
}

impl PoolState {
    /// Checks the partition invariants: disjoint sets covering all rows, with
    /// the subsample contained in the unlabeled pool.
    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<usize> = self
            .labeled
            .iter()
            .chain(&self.unlabeled)
            .chain(&self.test)
            .copied()
            .collect();
        all.sort_unstable();
        let expected: Vec<usize> = (0..self.num_rows).collect();
        if all != expected {
            return Err(Error::InvalidArgument(
                "labeled/unlabeled/test must partition the row set".into(),
            ));
        }
        for s in [&self.labeled, &self.unlabeled, &self.test, &self.subsample] {
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(
                    "index sets must be sorted and duplicate-free".into(),
                ));
            }
        }
        if !is_subset(&self.subsample, &self.unlabeled) {
            return Err(Error::InvalidArgument(
                "subsample must be a subset of the unlabeled pool".into(),
            ));
        }
        Ok(())
    }
}

fn is_subset(sub: &[usize], sup: &[usize]) -> bool {
    let mut j = 0;
    for &x in sub {
        while j < sup.len() && sup[j] < x {
            j += 1;
        }
        if j == sup.len() || sup[j] != x {
            return false;
        }
    }
    true
}

/// Draws `k` elements uniformly without replacement, returned sorted.
fn sample_sorted(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = pool
        .choose_multiple(rng, k.min(pool.len()))
        .copied()
        .collect();
    picked.sort_unstable();
    picked
}

/// Splits a dataset into a test set of `floor(test_fraction * N)` rows and an
/// unlabeled remainder, uniformly at random under `seed`.
pub fn make_split(dataset: &Dataset, seed: u64, test_fraction: f64) -> Result<PoolState> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if dataset.num_classes() < 2 {
        return Err(Error::InvalidDataset(
            "a dataset needs at least 2 classes".into(),
        ));
    }
    let n = dataset.num_rows();
    let test_size = (test_fraction * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..n).collect();
    let test = sample_sorted(&mut rng, &all, test_size);
    let mut unlabeled = Vec::with_capacity(n - test_size);
    let mut t = 0;
    for r in 0..n {
        if t < test.len() && test[t] == r {
            t += 1;
        } else {
            unlabeled.push(r);
        }
    }
    Ok(PoolState {
        num_rows: n,
        labeled: Vec::new(),
        unlabeled,
        test,
        subsample: Vec::new(),
    })
}

/// Seeds the labeled pool: one random instance of every class, then uniform
/// random additions until at least `min_size` rows are labeled.
pub fn make_initial_set(
    pool: &PoolState,
    dataset: &Dataset,
    seed: u64,
    min_size: usize,
) -> Result<PoolState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::new();
    for &class in &dataset.classes {
        let members: Vec<usize> = pool
            .unlabeled
            .iter()
            .copied()
            .filter(|&r| dataset.labels[r] == class)
            .collect();
        let Some(&row) = members.choose(&mut rng) else {
            return Err(Error::InvalidDataset(format!(
                "class {class} has no instances in the unlabeled pool"
            )));
        };
        picked.push(row);
    }
    if picked.len() < min_size {
        let remaining: Vec<usize> = pool
            .unlabeled
            .iter()
            .copied()
            .filter(|r| !picked.contains(r))
            .collect();
        let extra = sample_sorted(&mut rng, &remaining, min_size - picked.len());
        picked.extend(extra);
    }
    picked.sort_unstable();
    let unlabeled: Vec<usize> = pool
        .unlabeled
        .iter()
        .copied()
        .filter(|r| picked.binary_search(r).is_err())
        .collect();
    let out = PoolState {
        num_rows: pool.num_rows,
        labeled: picked,
        unlabeled,
        test: pool.test.clone(),
        subsample: Vec::new(),
    };
    out.validate()?;
    Ok(out)
}

/// Draws the evaluation subsample: `min(size, |unlabeled|)` rows uniformly
/// without replacement from the unlabeled pool.
pub fn draw_subsample(pool: &PoolState, seed: u64, size: usize) -> Result<PoolState> {
    if size == 0 {
        return Err(Error::InvalidArgument("subsample size must be >= 1".into()));
    }
    if pool.unlabeled.is_empty() {
        return Err(Error::EmptyInput("unlabeled pool".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subsample = sample_sorted(&mut rng, &pool.unlabeled, size);
    Ok(PoolState {
        subsample,
        ..pool.clone()
    })
}
