//! Random forest of Gini-impurity decision trees: bootstrap per tree, sqrt(d)
//! feature subsampling per node, per-tree class probability equal to the
//! class fraction in the reached leaf, forest posterior the mean over trees.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;

use super::LearnerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<u32>,
    pub dim: usize,
    trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        dist: Vec<f64>,
    },
}

fn feature_value(features: &FeatureMatrix, row: usize, col: usize) -> f64 {
    match features {
        FeatureMatrix::Dense { cols, values, .. } => values[row * cols + col],
        FeatureMatrix::Sparse {
            indptr,
            indices,
            values,
            ..
        } => {
            let range = indptr[row]..indptr[row + 1];
            match indices[range.clone()].binary_search(&col) {
                Ok(k) => values[indptr[row] + k],
                Err(_) => 0.0,
            }
        }
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let f = c as f64 / n;
            f * f
        })
        .sum::<f64>()
}

struct TreeBuilder<'a> {
    features: &'a FeatureMatrix,
    rows: &'a [usize],
    positions: &'a [usize],
    n_classes: usize,
    mtry: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Grows a subtree over `samples` (indices into `rows`) and returns its
    /// node index.
    fn grow(&mut self, samples: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &s in samples {
            counts[self.positions[s]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth > 0 && depth >= self.max_depth;
        if pure || depth_capped || samples.len() < 2 {
            return self.push_leaf(&counts, samples.len());
        }

        let parent_impurity = gini(&counts, samples.len());
        let dim = self.features.cols();
        let mut candidates: Vec<usize> =
            rand::seq::index::sample(rng, dim, self.mtry.min(dim)).into_vec();
        candidates.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)
        let mut column: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        let mut scan = |best: &mut Option<(f64, usize, f64)>, f: usize| {
            column.clear();
            column.extend(samples.iter().map(|&s| {
                (
                    feature_value(self.features, self.rows[s], f),
                    self.positions[s],
                )
            }));
            column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.clone();
            let n = samples.len();
            for i in 1..n {
                let (v_prev, class_prev) = column[i - 1];
                left[class_prev] += 1;
                right[class_prev] -= 1;
                if v_prev == column[i].0 {
                    continue;
                }
                let weighted =
                    (i as f64 * gini(&left, i) + (n - i) as f64 * gini(&right, n - i)) / n as f64;
                if best.map_or(weighted < parent_impurity - 1e-12, |(b, _, _)| weighted < b) {
                    *best = Some((weighted, f, (v_prev + column[i].0) / 2.0));
                }
            }
        };
        for &f in &candidates {
            scan(&mut best, f);
        }
        if best.is_none() {
            // widen to the remaining features so impure nodes only become
            // leaves when no split exists at all
            for f in (0..dim).filter(|f| !candidates.contains(f)) {
                scan(&mut best, f);
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.push_leaf(&counts, samples.len());
        };
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| feature_value(self.features, self.rows[s], feature) <= threshold);
        let left = self.grow(&left_samples, depth + 1, rng);
        let right = self.grow(&right_samples, depth + 1, rng);
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    fn push_leaf(&mut self, counts: &[usize], total: usize) -> usize {
        let dist = counts
            .iter()
            .map(|&c| c as f64 / total.max(1) as f64)
            .collect();
        self.nodes.push(Node::Leaf { dist });
        self.nodes.len() - 1
    }
}

pub(super) fn fit(
    spec: &LearnerSpec,
    features: &FeatureMatrix,
    rows: &[usize],
    classes: &[u32],
    positions: &[usize],
) -> ForestModel {
    let n = rows.len();
    let dim = features.cols();
    let mtry = (dim as f64).sqrt().floor().max(1.0) as usize;
    let trees = (0..spec.params.trees.max(1))
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                spec.seed ^ (t as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                features,
                rows,
                positions,
                n_classes: classes.len(),
                mtry,
                max_depth: spec.params.max_depth,
                nodes: Vec::new(),
            };
            let root = builder.grow(&bootstrap, 0, &mut rng);
            debug_assert_eq!(root, builder.nodes.len() - 1);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    ForestModel {
        classes: classes.to_vec(),
        dim,
        trees,
    }
}

impl ForestModel {
    fn leaf_dist<'a>(&'a self, tree: &'a Tree, features: &FeatureMatrix, row: usize) -> &'a [f64] {
        let mut node = tree.nodes.len() - 1; // root is pushed last
        loop {
            match &tree.nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if feature_value(features, row, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { dist } => return dist,
            }
        }
    }

    pub fn posterior_row(&self, features: &FeatureMatrix, row: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            for (a, d) in acc.iter_mut().zip(self.leaf_dist(tree, features, row)) {
                *a += d;
            }
        }
        let t = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
        acc
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Per-tree class distribution at the leaf reached by `row`.
    pub fn tree_leaf_distributions(&self, features: &FeatureMatrix, row: usize) -> Vec<Vec<f64>> {
        self.trees
            .iter()
            .map(|t| self.leaf_dist(t, features, row).to_vec())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit as fit_model, LearnerKind, TrainedModel};

    fn xor_grid() -> (FeatureMatrix, Vec<u32>) {
        // four tight clusters in an XOR layout: not linearly separable
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let j = i as f64 * 0.01;
            for (cx, cy, label) in [
                (0.0, 0.0, 0u32),
                (5.0, 5.0, 0),
                (0.0, 5.0, 1),
                (5.0, 0.0, 1),
            ] {
                values.extend_from_slice(&[cx + j, cy - j]);
                labels.push(label);
            }
        }
        (FeatureMatrix::dense(40, 2, values).unwrap(), labels)
    }

    #[test]
    fn forest_learns_xor() {
        let (features, labels) = xor_grid();
        let rows: Vec<usize> = (0..40).collect();
        let mut spec = LearnerSpec::new(LearnerKind::Forest, 3);
        spec.params.trees = 30;
        let model = fit_model(&spec, &features, &rows, &labels).unwrap();
        let preds = model.predict(&features, &rows).unwrap();
        let acc = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        assert!(acc >= 38, "accuracy {acc}/40");
    }

    #[test]
    fn agreeing_pure_trees_are_fully_confident() {
        // one informative feature, classes 20 units apart: every tree finds
        // the same separation and all leaves are pure
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let j = (i % 10) as f64 * 0.05;
            values.extend_from_slice(&[j, 1.0 - j]);
            labels.push(0u32);
            values.extend_from_slice(&[20.0 + j, j]);
            labels.push(1);
        }
        let features = FeatureMatrix::dense(40, 2, values).unwrap();
        let rows: Vec<usize> = (0..40).collect();
        let mut spec = LearnerSpec::new(LearnerKind::Forest, 9);
        spec.params.trees = 25;
        let model = fit_model(&spec, &features, &rows, &labels).unwrap();
        let conf = model.confidence(&features, &rows).unwrap();
        assert!(conf.iter().all(|&c| c == 1.0), "confidences {conf:?}");
    }

    #[test]
    fn tree_count_does_not_break_normalization() {
        let (features, labels) = xor_grid();
        let rows: Vec<usize> = (0..40).collect();
        for trees in [1, 5, 20] {
            let mut spec = LearnerSpec::new(LearnerKind::Forest, 1);
            spec.params.trees = trees;
            let model = fit_model(&spec, &features, &rows, &labels).unwrap();
            for p in model.posterior(&features, &rows).unwrap() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|&x| x >= 0.0));
            }
            if let TrainedModel::Forest(f) = &model {
                assert_eq!(f.tree_count(), trees);
                for dist in f.tree_leaf_distributions(&features, 7) {
                    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    assert!(dist.iter().all(|&x| x >= 0.0));
                }
            } else {
                panic!("expected forest");
            }
        }
    }
}
