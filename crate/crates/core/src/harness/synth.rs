//! Seeded synthetic datasets: Gaussian blobs laid out along a line with
//! controllable separation, classes interleaved when a class owns several
//! blobs. Used by tests and by self-contained experiment configs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub classes: usize,
    /// Gaussian clusters per class; adjacent clusters alternate classes.
    pub blobs_per_class: usize,
    /// Rows per class.
    pub per_class: usize,
    /// Distance between adjacent blob centers, in units of the unit noise.
    pub separation: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            name: "synthetic".into(),
            classes: 2,
            blobs_per_class: 1,
            per_class: 1000,
            separation: 3.0,
            dim: 2,
            seed: 0,
        }
    }
}

/// One standard normal draw via Box-Muller.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates the dataset described by `spec`, deterministically per seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if spec.blobs_per_class == 0 || spec.per_class == 0 || spec.dim == 0 {
        return Err(Error::InvalidArgument(
            "blob count, per-class count, and dim must be positive".into(),
        ));
    }
    if spec.separation < 0.0 {
        return Err(Error::InvalidArgument("separation must be >= 0".into()));
    }
    let total_blobs = spec.classes * spec.blobs_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(spec.classes * spec.per_class * spec.dim);
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for blob in 0..total_blobs {
        let class = (blob % spec.classes) as u32;
        let center = blob as f64 * spec.separation;
        // spread per-class remainders over the first blobs of each class
        let blob_of_class = blob / spec.classes;
        let base = spec.per_class / spec.blobs_per_class;
        let count = base + usize::from(blob_of_class < spec.per_class % spec.blobs_per_class);
        for _ in 0..count {
            values.push(center + standard_normal(&mut rng));
            for _ in 1..spec.dim {
                values.push(standard_normal(&mut rng));
            }
            labels.push(class);
        }
    }
    let rows = labels.len();
    Dataset::new(
        spec.name.clone(),
        FeatureMatrix::dense(rows, spec.dim, values)?,
        labels,
    )
}
