//! Result tables and summaries: per-(trace, criterion) decision rows, their
//! CSV round trip, and the aggregation into stop rates and correlation
//! summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::{CriterionOutcome, RunRecord};
use crate::criteria::{CriterionId, StopDecision};
use crate::data::RunTrace;
use crate::error::{Error, Result};

/// One (trace, criterion) evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub dataset_id: String,
    pub model_id: String,
    pub run_seed: u64,
    pub criterion: CriterionId,
    /// True when the criterion does not apply to the trace's model.
    pub skipped: bool,
    pub stopped: bool,
    pub stop_round: Option<usize>,
    pub labels_used: usize,
    pub accuracy: f64,
    /// Pearson r between the metric series and per-round test accuracy;
    /// absent when undefined (constant series or too few rounds).
    pub correlation: Option<f64>,
}

impl DecisionRow {
    pub fn from_decision(
        trace: &RunTrace,
        decision: &StopDecision,
        correlation: Option<f64>,
    ) -> DecisionRow {
        DecisionRow {
            dataset_id: trace.dataset_id.clone(),
            model_id: trace.model_id.clone(),
            run_seed: trace.seed,
            criterion: decision.criterion,
            skipped: false,
            stopped: decision.stopped,
            stop_round: decision.stop_round,
            labels_used: decision.labels_used,
            accuracy: decision.accuracy,
            correlation,
        }
    }

    pub fn skipped(trace: &RunTrace, criterion: CriterionId) -> DecisionRow {
        DecisionRow {
            dataset_id: trace.dataset_id.clone(),
            model_id: trace.model_id.clone(),
            run_seed: trace.seed,
            criterion,
            skipped: true,
            stopped: false,
            stop_round: None,
            labels_used: 0,
            accuracy: 0.0,
            correlation: None,
        }
    }
}

/// Fraction of applicable runs on which a criterion stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRate {
    pub criterion: CriterionId,
    pub runs: usize,
    pub stops: usize,
    pub rate: f64,
}

/// Mean metric/accuracy correlation, averaged per dataset first, with the
/// standard error of the mean across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub criterion: CriterionId,
    pub datasets: usize,
    pub mean: Option<f64>,
    pub standard_error: Option<f64>,
}

/// Full evaluation output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<DecisionRow>,
    pub stop_rates: Vec<StopRate>,
    pub correlations: Vec<CorrelationSummary>,
}

impl EvaluationReport {
    /// Builds the per-criterion summaries from raw rows.
    pub fn aggregate(rows: Vec<DecisionRow>) -> EvaluationReport {
        let mut by_criterion: BTreeMap<CriterionId, Vec<&DecisionRow>> = BTreeMap::new();
        for row in rows.iter().filter(|r| !r.skipped) {
            by_criterion.entry(row.criterion).or_default().push(row);
        }
        let mut stop_rates = Vec::new();
        let mut correlations = Vec::new();
        for (criterion, group) in &by_criterion {
            let stops = group.iter().filter(|r| r.stopped).count();
            stop_rates.push(StopRate {
                criterion: *criterion,
                runs: group.len(),
                stops,
                rate: stops as f64 / group.len() as f64,
            });

            let mut per_dataset: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for row in group {
                if let Some(r) = row.correlation {
                    per_dataset
                        .entry(row.dataset_id.as_str())
                        .or_default()
                        .push(r);
                }
            }
            let means: Vec<f64> = per_dataset
                .values()
                .map(|rs| rs.iter().sum::<f64>() / rs.len() as f64)
                .collect();
            let summary = if means.is_empty() {
                CorrelationSummary {
                    criterion: *criterion,
                    datasets: 0,
                    mean: None,
                    standard_error: None,
                }
            } else {
                let n = means.len() as f64;
                let mean = means.iter().sum::<f64>() / n;
                let se = if means.len() > 1 {
                    let var =
                        means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
                    Some((var / n).sqrt())
                } else {
                    None
                };
                CorrelationSummary {
                    criterion: *criterion,
                    datasets: means.len(),
                    mean: Some(mean),
                    standard_error: se,
                }
            };
            correlations.push(summary);
        }
        EvaluationReport {
            rows,
            stop_rates,
            correlations,
        }
    }
}

pub fn write_decisions_csv(path: &Path, rows: &[DecisionRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Config(format!("csv serialize: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Config(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn read_decisions_csv(path: &Path) -> Result<Vec<DecisionRow>> {
    if !path.exists() {
        return Err(Error::InvalidDataset(format!(
            "decisions file {} does not exist",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidDataset(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<DecisionRow>().enumerate() {
        rows.push(record.map_err(|e| Error::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "decisions file {}",
            path.display()
        )));
    }
    Ok(rows)
}

/// Groups decision rows into per-criterion outcome lists for the cost
/// analysis, restricted to one model and excluding skipped rows.
pub fn outcomes_from_rows(rows: &[DecisionRow], model: &str) -> Vec<CriterionOutcome> {
    let mut by_criterion: BTreeMap<CriterionId, Vec<RunRecord>> = BTreeMap::new();
    for row in rows {
        if row.skipped || row.model_id != model {
            continue;
        }
        by_criterion
            .entry(row.criterion)
            .or_default()
            .push(RunRecord {
                dataset_id: row.dataset_id.clone(),
                run_seed: row.run_seed,
                stopped: row.stopped,
                accuracy: row.accuracy,
                labels: row.labels_used,
            });
    }
    by_criterion
        .into_iter()
        .map(|(criterion, runs)| CriterionOutcome { criterion, runs })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        dataset: &str,
        criterion: CriterionId,
        seed: u64,
        stopped: bool,
        correlation: Option<f64>,
    ) -> DecisionRow {
        DecisionRow {
            dataset_id: dataset.into(),
            model_id: "linear".into(),
            run_seed: seed,
            criterion,
            skipped: false,
            stopped,
            stop_round: stopped.then_some(3),
            labels_used: 40,
            accuracy: 0.8,
            correlation,
        }
    }

    #[test]
    fn stop_rates_count_only_applicable_rows() {
        let mut rows = vec![
            row("a", CriterionId::Mes, 0, true, None),
            row("a", CriterionId::Mes, 1, false, None),
            row("a", CriterionId::Mes, 2, true, None),
        ];
        rows.push(DecisionRow {
            skipped: true,
            ..row("a", CriterionId::Mes, 3, false, None)
        });
        let report = EvaluationReport::aggregate(rows);
        let rate = &report.stop_rates[0];
        assert_eq!(rate.runs, 3);
        assert_eq!(rate.stops, 2);
        assert!((rate.rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_average_per_dataset_first() {
        let rows = vec![
            row("a", CriterionId::Mes, 0, true, Some(0.8)),
            row("a", CriterionId::Mes, 1, true, Some(0.6)),
            row("b", CriterionId::Mes, 0, true, Some(0.2)),
        ];
        let report = EvaluationReport::aggregate(rows);
        let summary = &report.correlations[0];
        // dataset means are 0.7 and 0.2 -> grand mean 0.45
        assert!((summary.mean.unwrap() - 0.45).abs() < 1e-12);
        assert_eq!(summary.datasets, 2);
        assert!(summary.standard_error.unwrap() > 0.0);
    }

    #[test]
    fn decisions_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.csv");
        let rows = vec![
            row("a", CriterionId::Mes, 0, true, Some(0.5)),
            row("a", CriterionId::Vm, 0, false, None),
        ];
        write_decisions_csv(&path, &rows).unwrap();
        let back = read_decisions_csv(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn outcomes_group_by_criterion_and_model() {
        let mut rows = vec![
            row("a", CriterionId::Mes, 0, true, None),
            row("b", CriterionId::Mes, 1, false, None),
            row("a", CriterionId::Vm, 0, true, None),
        ];
        rows.push(DecisionRow {
            model_id: "forest".into(),
            ..row("a", CriterionId::Mes, 9, true, None)
        });
        let outcomes = outcomes_from_rows(&rows, "linear");
        assert_eq!(outcomes.len(), 2);
        let mes = outcomes
            .iter()
            .find(|o| o.criterion == CriterionId::Mes)
            .unwrap();
        assert_eq!(mes.runs.len(), 2);
    }
}
