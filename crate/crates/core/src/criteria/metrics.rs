//! Per-round metric functions over trace records.
//!
//! Instance uncertainty is the module-wide convention `u(x) =
//! H(posterior)/ln(C)`, Shannon entropy normalized into [0, 1] so the
//! published thresholds stay comparable across class counts. MES is the one
//! exception: its stated form is `1 - max posterior`.

use crate::data::IterationRecord;
use crate::error::{Error, Result};
use crate::learners::argmax;
use crate::stats::cohen_kappa;

/// Shannon entropy of a distribution normalized by `ln(C)`, in [0, 1].
pub fn normalized_entropy(p: &[f64]) -> f64 {
    if p.len() <= 1 {
        return 0.0;
    }
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    (h / (p.len() as f64).ln()).clamp(0.0, 1.0)
}

fn require_batch(rec: &IterationRecord) -> Result<()> {
    if rec.selected.is_empty() {
        return Err(Error::EmptyInput(format!(
            "round {}: selected batch",
            rec.round
        )));
    }
    Ok(())
}

fn require_subsample(rec: &IterationRecord) -> Result<()> {
    if rec.subsample_posteriors.is_empty() {
        return Err(Error::EmptyInput(format!(
            "round {}: evaluation subsample",
            rec.round
        )));
    }
    Ok(())
}

/// Minimum uncertainty across the selected batch (pre-retrain posteriors).
pub fn max_confidence(rec: &IterationRecord) -> Result<f64> {
    require_batch(rec)?;
    Ok(rec
        .selected
        .iter()
        .map(|s| normalized_entropy(&s.posterior))
        .fold(f64::INFINITY, f64::min))
}

/// Identical metric to [`max_confidence`]; the criteria differ only in their
/// conditions.
pub fn uncertainty_convergence(rec: &IterationRecord) -> Result<f64> {
    max_confidence(rec)
}

/// Maximum uncertainty over the evaluation subsample.
pub fn entropy_mcs(rec: &IterationRecord) -> Result<f64> {
    require_subsample(rec)?;
    Ok(rec
        .subsample_posteriors
        .iter()
        .map(|p| normalized_entropy(p))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Expected error: mean of `1 - max posterior` over the subsample.
pub fn mes(rec: &IterationRecord) -> Result<f64> {
    require_subsample(rec)?;
    let sum: f64 = rec
        .subsample_posteriors
        .iter()
        .map(|p| 1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok(sum / rec.subsample_posteriors.len() as f64)
}

/// Fraction of the just-labeled batch the previous classifier predicted
/// correctly. `classes` maps posterior columns to class ids.
pub fn oracle_accuracy(rec: &IterationRecord, classes: &[u32]) -> Result<f64> {
    require_batch(rec)?;
    let correct = rec
        .selected
        .iter()
        .filter(|s| classes[argmax(&s.posterior)] == s.oracle_label)
        .count();
    Ok(correct as f64 / rec.selected.len() as f64)
}

/// Proportion of equal predictions between two consecutive rounds over the
/// subsample rows both rounds share.
pub fn classification_change(prev: &IterationRecord, cur: &IterationRecord) -> Result<f64> {
    let mut equal = 0usize;
    let mut common = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < prev.subsample_indices.len() && j < cur.subsample_indices.len() {
        match prev.subsample_indices[i].cmp(&cur.subsample_indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                if prev.subsample_predictions[i] == cur.subsample_predictions[j] {
                    equal += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    if common == 0 {
        return Err(Error::EmptyInput(format!(
            "rounds {} and {} share no subsample rows",
            prev.round, cur.round
        )));
    }
    Ok(equal as f64 / common as f64)
}

/// Mean uncertainty over the evaluation subsample.
pub fn overall_uncertainty(rec: &IterationRecord) -> Result<f64> {
    require_subsample(rec)?;
    let sum: f64 = rec
        .subsample_posteriors
        .iter()
        .map(|p| normalized_entropy(p))
        .sum();
    Ok(sum / rec.subsample_posteriors.len() as f64)
}

/// Expected macro F-score over the subsample, estimated from posteriors
/// alone: per class `c`, `E[TP] = sum of p_c over rows predicted c`,
/// `E[FP] = sum of (1 - p_c)` over the same rows, `E[FN] = sum of p_c over
/// rows predicted elsewhere`. Classes with an empty expected contingency
/// contribute an F of 0.
pub fn performance_convergence(rec: &IterationRecord) -> Result<f64> {
    require_subsample(rec)?;
    let n_classes = rec.subsample_posteriors[0].len();
    let mut tp = vec![0.0; n_classes];
    let mut fp = vec![0.0; n_classes];
    let mut fnn = vec![0.0; n_classes];
    for p in &rec.subsample_posteriors {
        let pred = argmax(p);
        for (c, &pc) in p.iter().enumerate() {
            if c == pred {
                tp[c] += pc;
                fp[c] += 1.0 - pc;
            } else {
                fnn[c] += pc;
            }
        }
    }
    let f_sum: f64 = (0..n_classes)
        .map(|c| {
            let denom = 2.0 * tp[c] + fp[c] + fnn[c];
            if denom > 0.0 {
                2.0 * tp[c] / denom
            } else {
                0.0
            }
        })
        .sum();
    Ok(f_sum / n_classes as f64)
}

/// Mean predicted-class probability over batch instances the previous
/// classifier got wrong; 0 when the whole batch was predicted correctly.
pub fn contradictory_information(rec: &IterationRecord, classes: &[u32]) -> Result<f64> {
    require_batch(rec)?;
    let mut sum = 0.0;
    let mut wrong = 0usize;
    for s in &rec.selected {
        let pred = argmax(&s.posterior);
        if classes[pred] != s.oracle_label {
            sum += s.posterior[pred];
            wrong += 1;
        }
    }
    Ok(if wrong == 0 { 0.0 } else { sum / wrong as f64 })
}

/// Mean Cohen's kappa over all pairs of the last `w` stop-set prediction
/// vectors (`window.len() == w`).
pub fn stabilizing_predictions(window: &[&IterationRecord]) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::EmptyInput("stabilizing-predictions window".into()));
    }
    if window.iter().any(|r| r.stopset_predictions.is_empty()) {
        return Err(Error::EmptyInput("stop set".into()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..window.len() {
        for j in i + 1..window.len() {
            sum += cohen_kappa(
                &window[i].stopset_predictions,
                &window[j].stopset_predictions,
            )?;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::InvalidArgument(
            "agreement window needs at least 2 rounds".into(),
        ));
    }
    Ok(sum / pairs as f64)
}

/// Population variance of the uncertainty over the subsample.
pub fn variance_uncertainty(rec: &IterationRecord) -> Result<f64> {
    require_subsample(rec)?;
    let u: Vec<f64> = rec
        .subsample_posteriors
        .iter()
        .map(|p| normalized_entropy(p))
        .collect();
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    Ok(u.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn record(
        selected: Vec<(u32, Vec<f64>)>,
        subsample: Vec<Vec<f64>>,
        predictions: Vec<u32>,
    ) -> IterationRecord {
        let subsample_indices: Vec<usize> = (0..subsample.len()).collect();
        IterationRecord {
            round: 0,
            labels_used: 10,
            selected: selected
                .into_iter()
                .enumerate()
                .map(
                    |(i, (oracle_label, posterior))| crate::data::SelectedInstance {
                        row: i,
                        oracle_label,
                        posterior,
                    },
                )
                .collect(),
            subsample_indices,
            subsample_posteriors: subsample,
            subsample_predictions: predictions,
            stopset_predictions: vec![],
            test_accuracy: 0.5,
        }
    }

    /// Direct entropy evaluation used as the oracle for the frozen constants.
    fn entropy_oracle(p: &[f64]) -> f64 {
        let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        h / (p.len() as f64).ln()
    }

    #[test]
    fn max_confidence_examples() {
        let one_hot = record(
            vec![(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])],
            vec![],
            vec![],
        );
        assert_eq!(max_confidence(&one_hot).unwrap(), 0.0);

        let mixed = record(
            vec![(0, vec![0.5, 0.5]), (0, vec![0.9, 0.1])],
            vec![],
            vec![],
        );
        let expect = entropy_oracle(&[0.9, 0.1]);
        assert_relative_eq!(max_confidence(&mixed).unwrap(), expect, epsilon = 1e-12);
        assert_relative_eq!(expect, 0.469, epsilon = 5e-4);

        let uniform = record(vec![(0, vec![0.5, 0.5])], vec![], vec![]);
        assert_eq!(max_confidence(&uniform).unwrap(), 1.0);
        assert!(max_confidence(&record(vec![], vec![], vec![])).is_err());
    }

    #[test]
    fn entropy_mcs_examples() {
        let hot = record(vec![], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(entropy_mcs(&hot).unwrap(), 0.0);

        let with_uniform = record(vec![], vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0, 0]);
        assert_eq!(entropy_mcs(&with_uniform).unwrap(), 1.0);

        let pair = record(vec![], vec![vec![0.8, 0.2], vec![0.6, 0.4]], vec![0, 0]);
        let expect = entropy_oracle(&[0.6, 0.4]);
        assert_relative_eq!(entropy_mcs(&pair).unwrap(), expect, epsilon = 1e-12);
        assert_relative_eq!(expect, 0.971, epsilon = 5e-4);
    }

    #[test]
    fn mes_examples() {
        let pair = record(vec![], vec![vec![0.9, 0.1], vec![0.6, 0.4]], vec![0, 0]);
        assert_relative_eq!(mes(&pair).unwrap(), 0.25, epsilon = 1e-12);
        let hot = record(vec![], vec![vec![0.0, 1.0]], vec![1]);
        assert_eq!(mes(&hot).unwrap(), 0.0);
        let uniform4 = record(vec![], vec![vec![0.25; 4], vec![0.25; 4]], vec![0, 0]);
        assert_relative_eq!(mes(&uniform4).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn oracle_accuracy_examples() {
        let classes = [0u32, 1];
        let all_right = record(
            vec![(0, vec![0.9, 0.1]), (1, vec![0.2, 0.8])],
            vec![],
            vec![],
        );
        assert_eq!(oracle_accuracy(&all_right, &classes).unwrap(), 1.0);

        let mut nine_of_ten = Vec::new();
        for _ in 0..9 {
            nine_of_ten.push((0u32, vec![0.8, 0.2]));
        }
        nine_of_ten.push((1, vec![0.8, 0.2]));
        let rec = record(nine_of_ten, vec![], vec![]);
        assert_relative_eq!(
            oracle_accuracy(&rec, &classes).unwrap(),
            0.9,
            epsilon = 1e-12
        );

        let none = record(
            vec![(1, vec![0.9, 0.1]), (0, vec![0.1, 0.9])],
            vec![],
            vec![],
        );
        assert_eq!(oracle_accuracy(&none, &classes).unwrap(), 0.0);
    }

    #[test]
    fn classification_change_examples() {
        let a = record(vec![], vec![vec![1.0, 0.0]; 4], vec![1, 1, 0, 0]);
        let same = record(vec![], vec![vec![1.0, 0.0]; 4], vec![1, 1, 0, 0]);
        assert_eq!(classification_change(&a, &same).unwrap(), 1.0);

        let differs = record(vec![], vec![vec![1.0, 0.0]; 4], vec![1, 0, 0, 0]);
        assert_relative_eq!(
            classification_change(&a, &differs).unwrap(),
            0.75,
            epsilon = 1e-12
        );

        let disjoint = record(vec![], vec![vec![1.0, 0.0]; 4], vec![0, 0, 1, 1]);
        assert_eq!(classification_change(&a, &disjoint).unwrap(), 0.0);

        // removals shrink the shared index set rather than erroring
        let mut shrunk = record(vec![], vec![vec![1.0, 0.0]; 2], vec![1, 0]);
        shrunk.subsample_indices = vec![1, 3];
        assert_eq!(classification_change(&a, &shrunk).unwrap(), 1.0);

        let mut elsewhere = record(vec![], vec![vec![1.0, 0.0]; 2], vec![1, 1]);
        elsewhere.subsample_indices = vec![90, 91];
        assert!(classification_change(&a, &elsewhere).is_err());
    }

    #[test]
    fn overall_uncertainty_examples() {
        let hot = record(vec![], vec![vec![1.0, 0.0]; 3], vec![0; 3]);
        assert_eq!(overall_uncertainty(&hot).unwrap(), 0.0);
        let uni = record(vec![], vec![vec![0.5, 0.5]; 3], vec![0; 3]);
        assert_eq!(overall_uncertainty(&uni).unwrap(), 1.0);
        let half = record(vec![], vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0, 0]);
        assert_relative_eq!(overall_uncertainty(&half).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn performance_convergence_examples() {
        // every class predicted with a one-hot posterior: F = 1 for each
        let perfect = record(vec![], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(performance_convergence(&perfect).unwrap(), 1.0);

        // worked expected-contingency case: two rows predicted class 0 at 0.8
        let skewed = record(vec![], vec![vec![0.8, 0.2], vec![0.8, 0.2]], vec![0, 0]);
        // F0 = 2*1.6/(2*1.6 + 0.4 + 0), F1 = 0
        let f0 = 3.2 / 3.6;
        assert_relative_eq!(
            performance_convergence(&skewed).unwrap(),
            f0 / 2.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(f0 / 2.0, 0.444, epsilon = 5e-4);
    }

    #[test]
    fn contradictory_information_examples() {
        let classes = [0u32, 1];
        let right = record(vec![(0, vec![0.9, 0.1])], vec![], vec![]);
        assert_eq!(contradictory_information(&right, &classes).unwrap(), 0.0);

        let two_wrong = record(
            vec![
                (1, vec![0.9, 0.1]),
                (1, vec![0.7, 0.3]),
                (0, vec![0.8, 0.2]),
            ],
            vec![],
            vec![],
        );
        assert_relative_eq!(
            contradictory_information(&two_wrong, &classes).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn stabilizing_predictions_examples() {
        let mk = |preds: Vec<u32>| {
            let mut r = record(vec![], vec![], vec![]);
            r.stopset_predictions = preds;
            r
        };
        let a = mk(vec![1, 1, 0, 0]);
        let b = mk(vec![1, 1, 0, 0]);
        let c = mk(vec![1, 1, 0, 0]);
        assert_eq!(stabilizing_predictions(&[&a, &b, &c]).unwrap(), 1.0);

        let d = mk(vec![1, 0, 0, 0]);
        // single pair: kappa([1,1,0,0],[1,0,0,0]) = 0.5
        assert_relative_eq!(
            stabilizing_predictions(&[&a, &d]).unwrap(),
            0.5,
            epsilon = 1e-12
        );

        let empty = mk(vec![]);
        assert!(stabilizing_predictions(&[&empty, &empty]).is_err());
    }

    #[test]
    fn stabilizing_predictions_chance_level_near_zero() {
        // independent pseudo-random predictions over a large stop set
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut r = record(vec![], vec![], vec![]);
            r.stopset_predictions = (0..4000).map(|_| rng.gen_range(0..2u32)).collect();
            r
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let kappa = stabilizing_predictions(&[&a, &b]).unwrap();
        assert!(kappa.abs() < 0.1, "kappa = {kappa}");
    }

    #[test]
    fn variance_uncertainty_examples() {
        let equal = record(vec![], vec![vec![0.7, 0.3]; 5], vec![0; 5]);
        assert_relative_eq!(variance_uncertainty(&equal).unwrap(), 0.0, epsilon = 1e-24);

        // uncertainties exactly {0, 1}
        let extremes = record(vec![], vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0, 0]);
        assert_relative_eq!(
            variance_uncertainty(&extremes).unwrap(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn normalized_entropy_bounds() {
        assert_eq!(normalized_entropy(&[1.0]), 0.0);
        assert_eq!(normalized_entropy(&[0.5, 0.5]), 1.0);
        assert_eq!(normalized_entropy(&[1.0, 0.0, 0.0]), 0.0);
        let third = 1.0 / 3.0;
        assert_relative_eq!(
            normalized_entropy(&[third, third, third]),
            1.0,
            epsilon = 1e-12
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn subsample_metrics_ignore_row_order(
                masses in proptest::collection::vec(0.0f64..=1.0, 2..30),
                rotation in 1usize..7,
            ) {
                let posteriors: Vec<Vec<f64>> =
                    masses.iter().map(|&p| vec![p, 1.0 - p]).collect();
                let preds: Vec<u32> = posteriors.iter().map(|p| u32::from(p[1] > p[0])).collect();
                let rec = record(vec![], posteriors.clone(), preds.clone());

                let mut rotated = posteriors;
                let mut rpreds = preds;
                let k = rotation % rotated.len();
                rotated.rotate_left(k);
                rpreds.rotate_left(k);
                let rec_rot = record(vec![], rotated, rpreds);

                prop_assert!((mes(&rec).unwrap() - mes(&rec_rot).unwrap()).abs() < 1e-12);
                prop_assert!(
                    (overall_uncertainty(&rec).unwrap() - overall_uncertainty(&rec_rot).unwrap())
                        .abs()
                        < 1e-12
                );
                prop_assert!(
                    (variance_uncertainty(&rec).unwrap() - variance_uncertainty(&rec_rot).unwrap())
                        .abs()
                        < 1e-12
                );
            }
        }
    }
}
