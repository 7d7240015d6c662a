//! The stopping-criterion catalogue: thirteen criteria, each a per-round
//! metric paired with a condition over the metric history, evaluated offline
//! on recorded run traces.

mod conditions;
pub mod metrics;
mod ssncut;

pub use conditions::{Aggregate, ConditionSpec, Direction, Extremum, Firing};
pub use ssncut::ssncut_metric;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RunTrace};
use crate::error::{Error, Result};
use crate::learners::LearnerKind;
use crate::stats::pearson;

/// Identifiers of the evaluated stopping criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionId {
    MaxConfidence,
    EntropyMcs,
    Mes,
    OracleAccMcs,
    ClassificationChange,
    OverallUncertainty,
    PerformanceConvergence,
    UncertaintyConvergence,
    ContradictoryInformation,
    StabilizingPredictions,
    Vm,
    Evm,
    #[serde(rename = "ssncut")]
    SsnCut,
}

/// Which model families a criterion supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applicability {
    /// Any classifier.
    All,
    /// Classifiers exposing posterior probabilities.
    Probabilistic,
    /// Margin classifiers on binary tasks.
    BinarySvm,
}

impl CriterionId {
    pub fn all() -> [CriterionId; 13] {
        use CriterionId::*;
        [
            MaxConfidence,
            EntropyMcs,
            Mes,
            OracleAccMcs,
            ClassificationChange,
            OverallUncertainty,
            PerformanceConvergence,
            UncertaintyConvergence,
            ContradictoryInformation,
            StabilizingPredictions,
            Vm,
            Evm,
            SsnCut,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            CriterionId::MaxConfidence => "max-confidence",
            CriterionId::EntropyMcs => "entropy-mcs",
            CriterionId::Mes => "mes",
            CriterionId::OracleAccMcs => "oracle-acc-mcs",
            CriterionId::ClassificationChange => "classification-change",
            CriterionId::OverallUncertainty => "overall-uncertainty",
            CriterionId::PerformanceConvergence => "performance-convergence",
            CriterionId::UncertaintyConvergence => "uncertainty-convergence",
            CriterionId::ContradictoryInformation => "contradictory-information",
            CriterionId::StabilizingPredictions => "stabilizing-predictions",
            CriterionId::Vm => "vm",
            CriterionId::Evm => "evm",
            CriterionId::SsnCut => "ssncut",
        }
    }

    pub fn parse(s: &str) -> Option<CriterionId> {
        CriterionId::all().into_iter().find(|c| c.name() == s)
    }

    pub fn applicability(&self) -> Applicability {
        match self {
            CriterionId::OracleAccMcs
            | CriterionId::ClassificationChange
            | CriterionId::StabilizingPredictions => Applicability::All,
            CriterionId::SsnCut => Applicability::BinarySvm,
            _ => Applicability::Probabilistic,
        }
    }
}

impl std::fmt::Display for CriterionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A criterion with its metric parameters and condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: CriterionId,
    /// Agreement window for `stabilizing-predictions`; ignored elsewhere.
    pub window: usize,
    pub condition: ConditionSpec,
}

impl CriterionSpec {
    /// The published default hyperparameters for each criterion.
    pub fn default_for(id: CriterionId) -> CriterionSpec {
        use CriterionId::*;
        let condition = match id {
            MaxConfidence => ConditionSpec::Threshold {
                direction: Direction::Leq,
                value: 0.001,
            },
            EntropyMcs => ConditionSpec::Threshold {
                direction: Direction::Leq,
                value: 0.01,
            },
            Mes => ConditionSpec::Threshold {
                direction: Direction::Leq,
                value: 0.01,
            },
            OracleAccMcs => ConditionSpec::Threshold {
                direction: Direction::Geq,
                value: 0.9,
            },
            ClassificationChange => ConditionSpec::Threshold {
                direction: Direction::Geq,
                value: 1.0,
            },
            OverallUncertainty => ConditionSpec::Threshold {
                direction: Direction::Leq,
                value: 0.01,
            },
            PerformanceConvergence => ConditionSpec::WindowGradient {
                window: 10,
                epsilon: 5e-5,
                aggregate: Aggregate::Mean,
                extremum: Extremum::Max,
            },
            UncertaintyConvergence => ConditionSpec::WindowGradient {
                window: 10,
                epsilon: 5e-5,
                aggregate: Aggregate::Median,
                extremum: Extremum::Min,
            },
            ContradictoryInformation => ConditionSpec::ConsecutiveChange {
                count: 3,
                min_delta: 0.0,
            },
            StabilizingPredictions => ConditionSpec::Threshold {
                direction: Direction::Geq,
                value: 0.99,
            },
            Vm => ConditionSpec::ConsecutiveChange {
                count: 2,
                min_delta: 0.0,
            },
            Evm => ConditionSpec::ConsecutiveChange {
                count: 2,
                min_delta: 0.001,
            },
            SsnCut => ConditionSpec::PatienceMinimum {
                patience: 10,
                rollback: true,
            },
        };
        CriterionSpec {
            id,
            window: 3,
            condition,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.condition.validate()?;
        if self.window == 0 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        if let ConditionSpec::Threshold { value, .. } = self.condition {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!(
                    "threshold for {} must be in [0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// All thirteen criteria at their default hyperparameters.
pub fn default_catalogue() -> Vec<CriterionSpec> {
    CriterionId::all()
        .into_iter()
        .map(CriterionSpec::default_for)
        .collect()
}

/// Machine-readable catalogue: id, applicability, and hyperparameters.
pub fn catalogue_json() -> String {
    let entries: Vec<serde_json::Value> = default_catalogue()
        .into_iter()
        .map(|spec| {
            serde_json::json!({
                "id": spec.id,
                "applicability": spec.id.applicability(),
                "window": if spec.id == CriterionId::StabilizingPredictions {
                    Some(spec.window)
                } else {
                    None
                },
                "condition": spec.condition,
            })
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("catalogue serializes")
}

/// Outcome of evaluating one criterion on one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub criterion: CriterionId,
    pub stopped: bool,
    pub stop_round: Option<usize>,
    /// Labels used at the stop round, or at the final round if never stopped.
    pub labels_used: usize,
    /// Test accuracy at the stop round, or at the final round if never stopped.
    pub accuracy: f64,
}

/// Checks the criterion/model pairing. Unknown model ids only qualify for
/// criteria that support every model.
fn check_applicable(spec: &CriterionSpec, trace: &RunTrace) -> Result<()> {
    let kind = LearnerKind::parse(&trace.model_id);
    let reject = |reason: &str| {
        Err(Error::Inapplicable {
            criterion: spec.id.name().into(),
            model: trace.model_id.clone(),
            reason: reason.into(),
        })
    };
    match spec.id.applicability() {
        Applicability::All => Ok(()),
        Applicability::Probabilistic => {
            if kind.is_none() {
                return reject("criterion requires posterior probabilities");
            }
            Ok(())
        }
        Applicability::BinarySvm => {
            if kind != Some(LearnerKind::Linear) {
                return reject("criterion is defined for margin classifiers");
            }
            if trace.classes.len() != 2 {
                return reject("criterion is defined for binary tasks");
            }
            Ok(())
        }
    }
}

/// Computes the criterion's per-round metric series over a trace. Entries are
/// `None` where the metric is undefined (first round of between-round
/// metrics, rounds before an agreement window fills, or an empty final
/// batch). `dataset` is required by `ssncut` only.
pub fn metric_series(
    spec: &CriterionSpec,
    trace: &RunTrace,
    dataset: Option<&Dataset>,
) -> Result<Vec<Option<f64>>> {
    use CriterionId::*;
    let recs = &trace.records;
    let per_round: Vec<Option<f64>> = match spec.id {
        MaxConfidence | UncertaintyConvergence => recs
            .iter()
            .map(|r| {
                if r.selected.is_empty() {
                    None
                } else {
                    metrics::max_confidence(r).ok()
                }
            })
            .collect(),
        EntropyMcs => recs.iter().map(|r| metrics::entropy_mcs(r).ok()).collect(),
        Mes => recs.iter().map(|r| metrics::mes(r).ok()).collect(),
        OracleAccMcs => recs
            .iter()
            .map(|r| {
                if r.selected.is_empty() {
                    None
                } else {
                    metrics::oracle_accuracy(r, &trace.classes).ok()
                }
            })
            .collect(),
        ClassificationChange => {
            let mut out = vec![None];
            for pair in recs.windows(2) {
                out.push(metrics::classification_change(&pair[0], &pair[1]).ok());
            }
            out.truncate(recs.len());
            out
        }
        OverallUncertainty => recs
            .iter()
            .map(|r| metrics::overall_uncertainty(r).ok())
            .collect(),
        PerformanceConvergence => recs
            .iter()
            .map(|r| metrics::performance_convergence(r).ok())
            .collect(),
        ContradictoryInformation => recs
            .iter()
            .map(|r| {
                if r.selected.is_empty() {
                    None
                } else {
                    metrics::contradictory_information(r, &trace.classes).ok()
                }
            })
            .collect(),
        StabilizingPredictions => {
            let w = spec.window;
            (0..recs.len())
                .map(|t| {
                    if t + 1 < w {
                        None
                    } else {
                        let window: Vec<&_> = recs[t + 1 - w..=t].iter().collect();
                        metrics::stabilizing_predictions(&window).ok()
                    }
                })
                .collect()
        }
        Vm | Evm => recs
            .iter()
            .map(|r| metrics::variance_uncertainty(r).ok())
            .collect(),
        SsnCut => {
            let Some(dataset) = dataset else {
                return Err(Error::InvalidArgument(
                    "ssncut needs the dataset to recompute similarities".into(),
                ));
            };
            // the spectral solve dominates evaluation time; rounds are independent
            recs.par_iter()
                .map(|r| ssncut_metric(r, dataset).ok())
                .collect()
        }
    };
    Ok(per_round)
}

/// Walks the trace in round order and applies the criterion's condition to
/// the metric series. When the condition never fires, the decision reports
/// the final round's labels and accuracy with `stopped = false`.
pub fn evaluate_criterion(
    trace: &RunTrace,
    spec: &CriterionSpec,
    dataset: Option<&Dataset>,
) -> Result<StopDecision> {
    spec.validate()?;
    check_applicable(spec, trace)?;
    if trace.records.is_empty() {
        return Err(Error::EmptyInput("trace has no records".into()));
    }
    let series = metric_series(spec, trace, dataset)?;
    match spec.condition.first_firing(&series) {
        Some(firing) => {
            let rec = &trace.records[firing.stop_round];
            Ok(StopDecision {
                criterion: spec.id,
                stopped: true,
                stop_round: Some(firing.stop_round),
                labels_used: rec.labels_used,
                accuracy: rec.test_accuracy,
            })
        }
        None => {
            let last = trace.records.last().unwrap();
            Ok(StopDecision {
                criterion: spec.id,
                stopped: false,
                stop_round: None,
                labels_used: last.labels_used,
                accuracy: last.test_accuracy,
            })
        }
    }
}

/// Pearson correlation between the criterion's metric series and the
/// per-round test accuracy, over the full trace and ignoring the stop
/// decision.
pub fn metric_accuracy_correlation(
    trace: &RunTrace,
    spec: &CriterionSpec,
    dataset: Option<&Dataset>,
) -> Result<f64> {
    check_applicable(spec, trace)?;
    let series = metric_series(spec, trace, dataset)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (value, rec) in series.iter().zip(&trace.records) {
        if let Some(v) = value {
            xs.push(*v);
            ys.push(rec.test_accuracy);
        }
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 3 defined rounds".into(),
        ));
    }
    pearson(&xs, &ys)
}
