//! Cost analysis: the combined cost measure `C = (1 - a)*m*n + j*l`,
//! non-stop treatments, cost-optimal region maps, Pareto frontiers, and
//! fixed-scenario rankings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionId;
use crate::error::{Error, Result};
use crate::stats::wilcoxon_signed_rank;

/// Deployment economics: price per label, price per misclassification, and
/// the number of predictions over the model's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub label_cost: f64,
    pub misclassification_cost: f64,
    pub lifetime_predictions: f64,
}

impl CostParams {
    pub fn new(
        label_cost: f64,
        misclassification_cost: f64,
        lifetime_predictions: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("label_cost", label_cost),
            ("misclassification_cost", misclassification_cost),
            ("lifetime_predictions", lifetime_predictions),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(CostParams {
            label_cost,
            misclassification_cost,
            lifetime_predictions,
        })
    }
}

/// Combined cost of stopping with accuracy `a` after `j` labels:
/// `(1 - a) * m * n + j * l`.
pub fn cost(accuracy: f64, labels: usize, params: &CostParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::InvalidArgument(format!(
            "accuracy must be in [0, 1], got {accuracy}"
        )));
    }
    Ok(
        (1.0 - accuracy) * params.misclassification_cost * params.lifetime_predictions
            + labels as f64 * params.label_cost,
    )
}

/// One recorded run of a criterion: where it stopped (or the final round if
/// it never did).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset_id: String,
    /// Seed of the underlying trace; pairs runs across criteria.
    pub run_seed: u64,
    pub stopped: bool,
    pub accuracy: f64,
    pub labels: usize,
}

/// A criterion's runs across datasets and splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub criterion: CriterionId,
    pub runs: Vec<RunRecord>,
}

/// Accounting for criteria that fail to stop on some runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Treatment {
    /// Replace non-stopped runs with the dataset's worst stopped (a, j).
    Penalize,
    /// Drop non-stopped runs; criteria that never stop are excluded.
    Include,
    /// Remove criteria with at least one non-stopped run entirely.
    Exclude,
}

impl Treatment {
    pub fn parse(s: &str) -> Option<Treatment> {
        match s {
            "penalize" => Some(Treatment::Penalize),
            "include" => Some(Treatment::Include),
            "exclude" => Some(Treatment::Exclude),
            _ => None,
        }
    }
}

/// Per-dataset worst stopped values: lowest accuracy and highest label count
/// any criterion reached on that dataset. Datasets where nothing ever
/// stopped fall back to the worst values over all runs.
pub fn dataset_worst(outcomes: &[CriterionOutcome]) -> BTreeMap<String, (f64, usize)> {
    let mut stopped: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut any: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for outcome in outcomes {
        for run in &outcome.runs {
            let fold = |slot: &mut (f64, usize)| {
                slot.0 = slot.0.min(run.accuracy);
                slot.1 = slot.1.max(run.labels);
            };
            fold(
                any.entry(run.dataset_id.clone())
                    .or_insert((f64::INFINITY, 0)),
            );
            if run.stopped {
                fold(
                    stopped
                        .entry(run.dataset_id.clone())
                        .or_insert((f64::INFINITY, 0)),
                );
            }
        }
    }
    for (dataset, worst) in any {
        stopped.entry(dataset).or_insert(worst);
    }
    stopped
}

/// Applies a non-stop treatment, returning adjusted outcomes plus warnings
/// for criteria that had to be dropped.
pub fn apply_treatment(
    outcomes: &[CriterionOutcome],
    treatment: Treatment,
    worst: &BTreeMap<String, (f64, usize)>,
) -> (Vec<CriterionOutcome>, Vec<String>) {
    let mut adjusted = Vec::new();
    let mut warnings = Vec::new();
    for outcome in outcomes {
        match treatment {
            Treatment::Penalize => {
                let runs = outcome
                    .runs
                    .iter()
                    .map(|run| {
                        if run.stopped {
                            run.clone()
                        } else {
                            let &(worst_acc, worst_labels) = worst
                                .get(&run.dataset_id)
                                .unwrap_or(&(run.accuracy, run.labels));
                            RunRecord {
                                accuracy: worst_acc,
                                labels: worst_labels,
                                ..run.clone()
                            }
                        }
                    })
                    .collect();
                adjusted.push(CriterionOutcome {
                    criterion: outcome.criterion,
                    runs,
                });
            }
            Treatment::Include => {
                let runs: Vec<RunRecord> =
                    outcome.runs.iter().filter(|r| r.stopped).cloned().collect();
                if runs.is_empty() {
                    warnings.push(format!(
                        "criterion {} never stopped; excluded under the include treatment",
                        outcome.criterion
                    ));
                } else {
                    adjusted.push(CriterionOutcome {
                        criterion: outcome.criterion,
                        runs,
                    });
                }
            }
            Treatment::Exclude => {
                if outcome.runs.iter().all(|r| r.stopped) {
                    adjusted.push(outcome.clone());
                }
            }
        }
    }
    (adjusted, warnings)
}

/// A grid of cost-optimal criteria over (n*m, l) axes. `None` cells are
/// indeterminate: the best and runner-up criteria were not significantly
/// different.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    /// Misclassification-cost axis (the product n*m).
    pub nm_values: Vec<f64>,
    /// Label-cost axis.
    pub l_values: Vec<f64>,
    /// Row-major `[l][nm]` winners.
    pub cells: Vec<Option<CriterionId>>,
}

impl RegionGrid {
    pub fn cell(&self, l_idx: usize, nm_idx: usize) -> Option<CriterionId> {
        self.cells[l_idx * self.nm_values.len() + nm_idx]
    }
}

/// Logarithmically spaced axis from `10^lo` to `10^hi` inclusive.
pub fn log_axis(lo_exponent: f64, hi_exponent: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            10f64.powf(lo_exponent + t * (hi_exponent - lo_exponent))
        })
        .collect()
}

/// Default axes: six orders of magnitude in both the n*m product and the
/// label cost.
pub fn default_axes() -> (Vec<f64>, Vec<f64>) {
    (log_axis(1.0, 7.0, 25), log_axis(-2.0, 4.0, 25))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-criterion mean Eq-style cost at fixed parameters, with each run's cost
/// computed first and the mean taken over runs.
fn mean_costs(
    outcomes: &[CriterionOutcome],
    params: &CostParams,
) -> Result<Vec<(CriterionId, f64)>> {
    outcomes
        .iter()
        .map(|o| {
            let costs: Result<Vec<f64>> = o
                .runs
                .iter()
                .map(|r| cost(r.accuracy, r.labels, params))
                .collect();
            Ok((o.criterion, mean(&costs?)))
        })
        .collect()
}

/// Paired per-run costs of two criteria over the runs they share.
fn paired_costs(
    a: &CriterionOutcome,
    b: &CriterionOutcome,
    params: &CostParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let index: BTreeMap<(&str, u64), &RunRecord> = b
        .runs
        .iter()
        .map(|r| ((r.dataset_id.as_str(), r.run_seed), r))
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for run in &a.runs {
        if let Some(other) = index.get(&(run.dataset_id.as_str(), run.run_seed)) {
            xs.push(cost(run.accuracy, run.labels, params)?);
            ys.push(cost(other.accuracy, other.labels, params)?);
        }
    }
    Ok((xs, ys))
}

/// Builds the cost-optimal region map. Each cell's winner is the criterion
/// with the lowest mean cost, kept only when a paired two-sided Wilcoxon
/// signed-rank test against the runner-up rejects at `alpha`.
pub fn region_map(
    outcomes: &[CriterionOutcome],
    nm_axis: &[f64],
    l_axis: &[f64],
    treatment: Treatment,
    alpha: f64,
) -> Result<RegionGrid> {
    if nm_axis.is_empty() || l_axis.is_empty() {
        return Err(Error::InvalidArgument(
            "region axes must be nonempty".into(),
        ));
    }
    let worst = dataset_worst(outcomes);
    let (treated, _) = apply_treatment(outcomes, treatment, &worst);
    if treated.len() < 2 {
        return Err(Error::InvalidArgument(
            "region map needs at least 2 criteria after treatment".into(),
        ));
    }
    let mut cells = Vec::with_capacity(nm_axis.len() * l_axis.len());
    for &l in l_axis {
        for &nm in nm_axis {
            let params = CostParams::new(l, nm, 1.0)?;
            let mut means = mean_costs(&treated, &params)?;
            means.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let (winner, _) = means[0];
            let (runner_up, _) = means[1];
            let a = treated.iter().find(|o| o.criterion == winner).unwrap();
            let b = treated.iter().find(|o| o.criterion == runner_up).unwrap();
            let (xs, ys) = paired_costs(a, b, &params)?;
            let significant = if xs.len() < 2 {
                false
            } else {
                let (_, p) = wilcoxon_signed_rank(&xs, &ys)?;
                p < alpha
            };
            cells.push(significant.then_some(winner));
        }
    }
    Ok(RegionGrid {
        nm_values: nm_axis.to_vec(),
        l_values: l_axis.to_vec(),
        cells,
    })
}

/// Indices of the points not dominated by any other: no other point has both
/// fewer-or-equal labels and greater-or-equal accuracy with one strict.
pub fn pareto_frontier(points: &[(usize, f64)]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .cmp(&points[b].0)
            .then(points[b].1.partial_cmp(&points[a].1).unwrap())
    });
    let mut frontier = Vec::new();
    let mut best_prev_acc = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let labels = points[order[i]].0;
        let mut j = i;
        while j + 1 < order.len() && points[order[j + 1]].0 == labels {
            j += 1;
        }
        let group_max = points[order[i]].1; // sorted descending within group
        if group_max > best_prev_acc {
            frontier.extend(
                order[i..=j]
                    .iter()
                    .copied()
                    .filter(|&idx| points[idx].1 == group_max),
            );
            best_prev_acc = group_max;
        }
        i = j + 1;
    }
    frontier.sort_unstable();
    frontier
}

/// A criterion's aggregate standing under one cost scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCriterion {
    pub criterion: CriterionId,
    pub mean_cost: f64,
    pub mean_accuracy: f64,
    pub mean_labels: f64,
}

/// Criteria sorted by mean cost under fixed parameters; ties break toward
/// fewer mean labels.
pub fn scenario_rank(
    outcomes: &[CriterionOutcome],
    params: &CostParams,
) -> Result<Vec<RankedCriterion>> {
    let mut ranked: Vec<RankedCriterion> = outcomes
        .iter()
        .map(|o| {
            let costs: Result<Vec<f64>> = o
                .runs
                .iter()
                .map(|r| cost(r.accuracy, r.labels, params))
                .collect();
            let accs: Vec<f64> = o.runs.iter().map(|r| r.accuracy).collect();
            let labels: Vec<f64> = o.runs.iter().map(|r| r.labels as f64).collect();
            Ok(RankedCriterion {
                criterion: o.criterion,
                mean_cost: mean(&costs?),
                mean_accuracy: mean(&accs),
                mean_labels: mean(&labels),
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        a.mean_cost
            .partial_cmp(&b.mean_cost)
            .unwrap()
            .then(a.mean_labels.partial_cmp(&b.mean_labels).unwrap())
            .then(a.criterion.cmp(&b.criterion))
    });
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn outcome(
        criterion: CriterionId,
        runs: Vec<(&str, u64, bool, f64, usize)>,
    ) -> CriterionOutcome {
        CriterionOutcome {
            criterion,
            runs: runs
                .into_iter()
                .map(|(d, seed, stopped, accuracy, labels)| RunRecord {
                    dataset_id: d.into(),
                    run_seed: seed,
                    stopped,
                    accuracy,
                    labels,
                })
                .collect(),
        }
    }

    #[test]
    fn cost_formula_examples() {
        // perfect accuracy leaves only the label bill
        let p = CostParams::new(13.60, 10_742.0, 336_000.0).unwrap();
        assert_relative_eq!(cost(1.0, 500, &p).unwrap(), 6800.0, epsilon = 1e-9);
        // mammogram-style parameters at a = 0.9, j = 1000
        let c = cost(0.9, 1000, &p).unwrap();
        assert!((c - 360_944_800.0).abs() < 0.005, "got {c}");
    }

    #[test]
    fn cost_rejects_bad_accuracy_and_params() {
        let p = CostParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(cost(1.2, 5, &p).is_err());
        assert!(cost(-0.1, 5, &p).is_err());
        assert!(CostParams::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cost_depends_on_nm_only_through_the_product() {
        let a = CostParams::new(2.0, 3.0, 8.0).unwrap();
        let b = CostParams::new(2.0, 6.0, 4.0).unwrap();
        for (acc, j) in [(0.3, 10), (0.9, 500), (0.0, 0)] {
            assert_relative_eq!(
                cost(acc, j, &a).unwrap(),
                cost(acc, j, &b).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn joint_scaling_preserves_ranking() {
        let outcomes = vec![
            outcome(
                CriterionId::Mes,
                vec![("d", 0, true, 0.9, 200), ("d", 1, true, 0.92, 210)],
            ),
            outcome(
                CriterionId::Vm,
                vec![("d", 0, true, 0.7, 60), ("d", 1, true, 0.72, 70)],
            ),
        ];
        let base = CostParams::new(1.0, 50.0, 10.0).unwrap();
        let scaled = CostParams::new(7.0, 350.0, 10.0).unwrap();
        let r1 = scenario_rank(&outcomes, &base).unwrap();
        let r2 = scenario_rank(&outcomes, &scaled).unwrap();
        let ids1: Vec<_> = r1.iter().map(|r| r.criterion).collect();
        let ids2: Vec<_> = r2.iter().map(|r| r.criterion).collect();
        assert_eq!(ids1, ids2);
        for (a, b) in r1.iter().zip(&r2) {
            assert_relative_eq!(b.mean_cost, 7.0 * a.mean_cost, max_relative = 1e-12);
        }
    }

    #[test]
    fn treatments_are_identity_when_everything_stops() {
        let outcomes = vec![
            outcome(CriterionId::Mes, vec![("d", 0, true, 0.9, 100)]),
            outcome(CriterionId::Vm, vec![("d", 0, true, 0.8, 50)]),
        ];
        let worst = dataset_worst(&outcomes);
        for t in [Treatment::Penalize, Treatment::Include, Treatment::Exclude] {
            let (adjusted, warnings) = apply_treatment(&outcomes, t, &worst);
            assert_eq!(adjusted, outcomes);
            assert!(warnings.is_empty());
        }
    }

    #[test]
    fn penalize_uses_dataset_worst_values() {
        let outcomes = vec![
            outcome(CriterionId::Mes, vec![("d", 0, true, 0.6, 300)]),
            outcome(CriterionId::Vm, vec![("d", 0, false, 0.95, 120)]),
        ];
        let worst = dataset_worst(&outcomes);
        let (adjusted, _) = apply_treatment(&outcomes, Treatment::Penalize, &worst);
        let vm = adjusted
            .iter()
            .find(|o| o.criterion == CriterionId::Vm)
            .unwrap();
        assert_eq!(vm.runs[0].accuracy, 0.6);
        assert_eq!(vm.runs[0].labels, 300);
        assert!(!vm.runs[0].stopped);
    }

    #[test]
    fn include_drops_runs_and_warns_on_empty() {
        let outcomes = vec![
            outcome(
                CriterionId::Mes,
                vec![("d", 0, true, 0.9, 100), ("d", 1, false, 0.91, 400)],
            ),
            outcome(
                CriterionId::Vm,
                vec![("d", 0, false, 0.8, 400), ("d", 1, false, 0.8, 400)],
            ),
        ];
        let worst = dataset_worst(&outcomes);
        let (adjusted, warnings) = apply_treatment(&outcomes, Treatment::Include, &worst);
        assert_eq!(adjusted.len(), 1);
        assert_eq!(adjusted[0].runs.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("vm"));
    }

    #[test]
    fn exclude_removes_any_nonstop_criterion() {
        let outcomes = vec![
            outcome(
                CriterionId::Mes,
                vec![("d", 0, true, 0.9, 100), ("d", 1, true, 0.88, 90)],
            ),
            outcome(
                CriterionId::Vm,
                vec![("d", 0, true, 0.8, 50), ("d", 1, false, 0.8, 400)],
            ),
        ];
        let worst = dataset_worst(&outcomes);
        let (adjusted, _) = apply_treatment(&outcomes, Treatment::Exclude, &worst);
        assert_eq!(adjusted.len(), 1);
        assert_eq!(adjusted[0].criterion, CriterionId::Mes);
    }

    #[test]
    fn penalize_never_improves_mean_accuracy_or_labels() {
        let outcomes = vec![
            outcome(
                CriterionId::Mes,
                vec![("d", 0, true, 0.5, 500), ("e", 0, true, 0.55, 480)],
            ),
            outcome(
                CriterionId::Vm,
                vec![("d", 0, false, 0.9, 100), ("e", 0, true, 0.85, 90)],
            ),
        ];
        let worst = dataset_worst(&outcomes);
        let (adjusted, _) = apply_treatment(&outcomes, Treatment::Penalize, &worst);
        for (before, after) in outcomes.iter().zip(&adjusted) {
            let m = |runs: &[RunRecord]| {
                (
                    mean(&runs.iter().map(|r| r.accuracy).collect::<Vec<_>>()),
                    mean(&runs.iter().map(|r| r.labels as f64).collect::<Vec<_>>()),
                )
            };
            let (acc_b, lab_b) = m(&before.runs);
            let (acc_a, lab_a) = m(&after.runs);
            assert!(acc_a <= acc_b + 1e-12);
            assert!(lab_a >= lab_b - 1e-12);
        }
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto_frontier(&[(100, 0.9)]), vec![0]);
        assert_eq!(pareto_frontier(&[(100, 0.9), (200, 0.8)]), vec![0]);
        // equal points both survive; a strictly worse one does not
        assert_eq!(
            pareto_frontier(&[(50, 0.7), (50, 0.7), (60, 0.6)]),
            vec![0, 1]
        );
    }

    #[test]
    fn pareto_matches_quadratic_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(1..=60);
            let points: Vec<(usize, f64)> = (0..n)
                .map(|_| (rng.gen_range(0..30), (rng.gen_range(0..20) as f64) / 20.0))
                .collect();
            let fast = pareto_frontier(&points);
            let brute: Vec<usize> = (0..points.len())
                .filter(|&i| {
                    !points.iter().enumerate().any(|(j, q)| {
                        j != i
                            && q.0 <= points[i].0
                            && q.1 >= points[i].1
                            && (q.0 < points[i].0 || q.1 > points[i].1)
                    })
                })
                .collect();
            assert_eq!(fast, brute, "points {points:?}");
        }
    }

    #[test]
    fn scenario_rank_degeneracies() {
        let outcomes = vec![
            outcome(CriterionId::Mes, vec![("d", 0, true, 0.95, 400)]),
            outcome(CriterionId::Vm, vec![("d", 0, true, 0.70, 40)]),
            outcome(
                CriterionId::StabilizingPredictions,
                vec![("d", 0, true, 0.90, 150)],
            ),
        ];
        // l = 0: ranking is by accuracy only
        let free_labels = CostParams::new(0.0, 10.0, 100.0).unwrap();
        let ranked = scenario_rank(&outcomes, &free_labels).unwrap();
        assert_eq!(ranked[0].criterion, CriterionId::Mes);
        // m = 0: ranking is by labels only
        let free_errors = CostParams::new(1.0, 0.0, 100.0).unwrap();
        let ranked = scenario_rank(&outcomes, &free_errors).unwrap();
        assert_eq!(ranked[0].criterion, CriterionId::Vm);
        // single criterion is trivially first
        let solo = vec![outcome(CriterionId::Mes, vec![("d", 0, true, 0.9, 10)])];
        let ranked = scenario_rank(&solo, &free_errors).unwrap();
        assert_eq!(ranked.len(), 1);
    }

    #[test]
    fn scenario_rank_matches_hand_computation() {
        let outcomes = vec![
            outcome(
                CriterionId::Mes,
                vec![("d", 0, true, 0.9, 100), ("d", 1, true, 0.8, 120)],
            ),
            outcome(
                CriterionId::Vm,
                vec![("d", 0, true, 0.6, 30), ("d", 1, true, 0.7, 20)],
            ),
        ];
        let params = CostParams::new(2.0, 5.0, 100.0).unwrap();
        let ranked = scenario_rank(&outcomes, &params).unwrap();
        // mes: ((0.1*500 + 200) + (0.2*500 + 240))/2 = (250 + 340)/2 = 295
        // vm:  ((0.4*500 + 60) + (0.3*500 + 40))/2 = (260 + 190)/2 = 225
        assert_eq!(ranked[0].criterion, CriterionId::Vm);
        assert_relative_eq!(ranked[0].mean_cost, 225.0, epsilon = 1e-9);
        assert_relative_eq!(ranked[1].mean_cost, 295.0, epsilon = 1e-9);
    }

    #[test]
    fn cost_is_linear_in_each_parameter() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        runner
            .run(
                &(
                    0.0f64..=1.0,
                    0usize..1000,
                    0.0f64..100.0,
                    0.0f64..100.0,
                    0.0f64..1000.0,
                    0.1f64..10.0,
                ),
                |(a, j, l, m, n, c)| {
                    let base = cost(a, j, &CostParams::new(l, m, n).unwrap()).unwrap();
                    // scaling l scales only the label term; scaling m scales only the error term
                    let scaled_m = cost(a, j, &CostParams::new(l, c * m, n).unwrap()).unwrap();
                    let err_term = (1.0 - a) * m * n;
                    prop_assert!(
                        (scaled_m - (base + (c - 1.0) * err_term)).abs()
                            < 1e-6 * (1.0 + base.abs())
                    );
                    // nonincreasing in accuracy
                    let better = cost(a.min(1.0), j, &CostParams::new(l, m, n).unwrap()).unwrap();
                    let worse =
                        cost((a - 0.1).max(0.0), j, &CostParams::new(l, m, n).unwrap()).unwrap();
                    prop_assert!(worse + 1e-12 >= better);
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn region_map_identical_outcomes_are_indeterminate() {
        let runs = vec![
            ("d", 0, true, 0.8, 100),
            ("d", 1, true, 0.82, 110),
            ("d", 2, true, 0.78, 95),
        ];
        let outcomes = vec![
            outcome(CriterionId::Mes, runs.clone()),
            outcome(CriterionId::Vm, runs),
        ];
        let grid = region_map(
            &outcomes,
            &log_axis(0.0, 3.0, 4),
            &log_axis(0.0, 2.0, 3),
            Treatment::Penalize,
            0.05,
        )
        .unwrap();
        assert!(grid.cells.iter().all(Option::is_none));
    }

    #[test]
    fn region_map_degenerate_axes_pick_expected_winners() {
        // 12 paired runs and a clear separation so the signed-rank test can reject
        let mut fast = Vec::new();
        let mut accurate = Vec::new();
        for s in 0..12 {
            let eps = (s % 3) as f64 * 0.001;
            fast.push(("d", s, true, 0.70 + eps, 40 + s as usize));
            accurate.push(("d", s, true, 0.95 + eps, 400 + s as usize));
        }
        let outcomes = vec![
            outcome(CriterionId::Vm, fast),
            outcome(CriterionId::Mes, accurate),
        ];
        // l near zero: accuracy decides
        let grid = region_map(&outcomes, &[1e6], &[1e-9], Treatment::Penalize, 0.05).unwrap();
        assert_eq!(grid.cell(0, 0), Some(CriterionId::Mes));
        // nm near zero: labels decide
        let grid = region_map(&outcomes, &[1e-9], &[1.0], Treatment::Penalize, 0.05).unwrap();
        assert_eq!(grid.cell(0, 0), Some(CriterionId::Vm));
    }
}
