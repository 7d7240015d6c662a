//! Condition combinators: boolean rules over a metric history that decide
//! when a criterion fires.
//!
//! Conditions consume an `Option<f64>` series (one entry per round; `None`
//! where the metric is undefined, e.g. before a window fills). Evaluation
//! starts at the first defined round and stops at the first gap after it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Fires when the metric is `<=` the threshold.
    Leq,
    /// Fires when the metric is `>=` the threshold.
    Geq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

/// How a firing maps to the reported stop round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Firing {
    /// Round at which the condition was observed to hold.
    pub fired_round: usize,
    /// Round the decision points at (differs under patience rollback).
    pub stop_round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionSpec {
    /// Fires on the first round whose metric passes the threshold.
    Threshold { direction: Direction, value: f64 },
    /// Fires once the metric has strictly decreased, each time by at least
    /// `min_delta`, over `count` consecutive steps.
    ConsecutiveChange { count: usize, min_delta: f64 },
    /// Sliding-window stationarity: the window aggregate must reach a new
    /// extremum while the windowed finite-difference derivative points toward
    /// that extremum with magnitude below `epsilon`.
    WindowGradient {
        window: usize,
        epsilon: f64,
        aggregate: Aggregate,
        extremum: Extremum,
    },
    /// Fires when the metric has not reached a new minimum for `patience`
    /// rounds; with `rollback` the decision points `patience` rounds back.
    PatienceMinimum { patience: usize, rollback: bool },
}

impl ConditionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConditionSpec::Threshold { value, .. } => {
                if !value.is_finite() {
                    return Err(Error::InvalidArgument("threshold must be finite".into()));
                }
            }
            ConditionSpec::ConsecutiveChange { count, min_delta } => {
                if *count == 0 {
                    return Err(Error::InvalidArgument(
                        "consecutive-change count must be >= 1".into(),
                    ));
                }
                if min_delta.is_nan() || *min_delta < 0.0 {
                    return Err(Error::InvalidArgument("min_delta must be >= 0".into()));
                }
            }
            ConditionSpec::WindowGradient {
                window, epsilon, ..
            } => {
                if *window == 0 {
                    return Err(Error::InvalidArgument("window must be >= 1".into()));
                }
                if epsilon.is_nan() || *epsilon <= 0.0 {
                    return Err(Error::InvalidArgument("epsilon must be > 0".into()));
                }
            }
            ConditionSpec::PatienceMinimum { patience, .. } => {
                if *patience == 0 {
                    return Err(Error::InvalidArgument("patience must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// First round at which the condition fires over the series, or `None`.
    pub fn first_firing(&self, series: &[Option<f64>]) -> Option<Firing> {
        let offset = series.iter().position(Option::is_some)?;
        let values: Vec<f64> = series[offset..]
            .iter()
            .take_while(|v| v.is_some())
            .map(|v| v.unwrap())
            .collect();
        let fired = self.first_firing_dense(&values)?;
        Some(Firing {
            fired_round: offset + fired.fired_round,
            stop_round: offset + fired.stop_round,
        })
    }

    fn first_firing_dense(&self, m: &[f64]) -> Option<Firing> {
        match *self {
            ConditionSpec::Threshold { direction, value } => {
                let hit = m.iter().position(|&x| match direction {
                    Direction::Leq => x <= value,
                    Direction::Geq => x >= value,
                })?;
                Some(Firing {
                    fired_round: hit,
                    stop_round: hit,
                })
            }
            ConditionSpec::ConsecutiveChange { count, min_delta } => {
                let mut streak = 0;
                for t in 1..m.len() {
                    let drop = m[t - 1] - m[t];
                    if drop > 0.0 && drop >= min_delta {
                        streak += 1;
                        if streak >= count {
                            return Some(Firing {
                                fired_round: t,
                                stop_round: t,
                            });
                        }
                    } else {
                        streak = 0;
                    }
                }
                None
            }
            ConditionSpec::WindowGradient {
                window,
                epsilon,
                aggregate,
                extremum,
            } => {
                if window < 2 {
                    // a single-value window has no finite difference
                    return None;
                }
                let mut best: Option<f64> = None;
                for t in (window - 1)..m.len() {
                    let w = &m[t + 1 - window..=t];
                    let agg = aggregate_of(aggregate, w);
                    let diffs: Vec<f64> = w.windows(2).map(|p| p[1] - p[0]).collect();
                    let deriv = aggregate_of(aggregate, &diffs);
                    let is_new_extremum = match (extremum, best) {
                        (_, None) => true,
                        (Extremum::Max, Some(b)) => agg > b,
                        (Extremum::Min, Some(b)) => agg < b,
                    };
                    if is_new_extremum {
                        best = Some(agg);
                        let fires = match extremum {
                            Extremum::Max => deriv > 0.0 && deriv < epsilon,
                            Extremum::Min => deriv < 0.0 && -deriv < epsilon,
                        };
                        if fires {
                            return Some(Firing {
                                fired_round: t,
                                stop_round: t,
                            });
                        }
                    }
                }
                None
            }
            ConditionSpec::PatienceMinimum { patience, rollback } => {
                let mut best = m[0];
                let mut best_round = 0;
                for t in 1..m.len() {
                    if m[t] < best {
                        best = m[t];
                        best_round = t;
                    }
                    if t - best_round >= patience {
                        return Some(Firing {
                            fired_round: t,
                            stop_round: if rollback { t - patience } else { t },
                        });
                    }
                }
                None
            }
        }
    }
}

pub(crate) fn aggregate_of(kind: Aggregate, values: &[f64]) -> f64 {
    match kind {
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = sorted.len() / 2;
            if sorted.len().is_multiple_of(2) {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            } else {
                sorted[mid]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn some(values: &[f64]) -> Vec<Option<f64>> {
        values.iter().map(|&v| Some(v)).collect()
    }

    #[test]
    fn threshold_first_qualifying_round() {
        let cond = ConditionSpec::Threshold {
            direction: Direction::Leq,
            value: 0.2,
        };
        let series = some(&[0.9, 0.5, 0.2, 0.1]);
        assert_eq!(cond.first_firing(&series).unwrap().stop_round, 2);
        let cond_up = ConditionSpec::Threshold {
            direction: Direction::Geq,
            value: 1.0,
        };
        assert_eq!(
            cond_up
                .first_firing(&some(&[0.7, 1.0, 1.0]))
                .unwrap()
                .stop_round,
            1
        );
        assert!(cond_up.first_firing(&some(&[0.7, 0.9])).is_none());
    }

    #[test]
    fn threshold_skips_undefined_prefix() {
        let cond = ConditionSpec::Threshold {
            direction: Direction::Geq,
            value: 1.0,
        };
        let series = vec![None, None, Some(0.5), Some(1.0)];
        assert_eq!(cond.first_firing(&series).unwrap().stop_round, 3);
    }

    #[test]
    fn consecutive_change_requires_strict_drops() {
        let cond = ConditionSpec::ConsecutiveChange {
            count: 3,
            min_delta: 0.0,
        };
        // drops at rounds 1, 2, 3
        assert_eq!(
            cond.first_firing(&some(&[0.9, 0.8, 0.7, 0.6]))
                .unwrap()
                .stop_round,
            3
        );
        // constant series never decreases
        assert!(cond.first_firing(&some(&[0.5; 6])).is_none());
        // a flat step resets the streak
        assert!(cond.first_firing(&some(&[0.9, 0.8, 0.8, 0.7])).is_none());
    }

    #[test]
    fn consecutive_change_with_min_delta() {
        let vm = ConditionSpec::ConsecutiveChange {
            count: 2,
            min_delta: 0.0,
        };
        let evm = ConditionSpec::ConsecutiveChange {
            count: 2,
            min_delta: 0.001,
        };
        let series = some(&[0.3, 0.2, 0.1]);
        assert_eq!(vm.first_firing(&series).unwrap().stop_round, 2);
        assert_eq!(evm.first_firing(&series).unwrap().stop_round, 2);
        // drops of 1e-4 are below the EVM delta
        let tiny = some(&[0.3, 0.2999, 0.2998]);
        assert_eq!(vm.first_firing(&tiny).unwrap().stop_round, 2);
        assert!(evm.first_firing(&tiny).is_none());
    }

    #[test]
    fn window_gradient_never_fires_before_window_fills() {
        let cond = ConditionSpec::WindowGradient {
            window: 4,
            epsilon: 1.0,
            aggregate: Aggregate::Mean,
            extremum: Extremum::Max,
        };
        // rising slowly: new max with small positive derivative each round
        let series = some(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let firing = cond.first_firing(&series).unwrap();
        assert_eq!(firing.stop_round, 3);
    }

    #[test]
    fn window_gradient_constant_series_never_fires() {
        let cond = ConditionSpec::WindowGradient {
            window: 3,
            epsilon: 0.5,
            aggregate: Aggregate::Mean,
            extremum: Extremum::Max,
        };
        assert!(cond.first_firing(&some(&[0.4; 8])).is_none());
    }

    #[test]
    fn window_gradient_min_variant_fires_on_slow_decline() {
        let cond = ConditionSpec::WindowGradient {
            window: 3,
            epsilon: 0.05,
            aggregate: Aggregate::Median,
            extremum: Extremum::Min,
        };
        // steep drops first (derivative too large), then a slow decline
        let series = some(&[1.0, 0.6, 0.2, 0.19, 0.18, 0.17]);
        let firing = cond.first_firing(&series).unwrap();
        // first window with median diff magnitude < 0.05 at a new minimum
        assert_eq!(firing.stop_round, 4);
    }

    #[test]
    fn patience_minimum_rollback_points_at_the_minimum() {
        let cond = ConditionSpec::PatienceMinimum {
            patience: 10,
            rollback: true,
        };
        // minimum at round 4, flat afterwards
        let mut vals = vec![0.9, 0.7, 0.5, 0.4, 0.3];
        vals.extend(std::iter::repeat_n(0.35, 12));
        let firing = cond.first_firing(&some(&vals)).unwrap();
        assert_eq!(firing.fired_round, 14);
        assert_eq!(firing.stop_round, 4);
    }

    #[test]
    fn patience_minimum_without_rollback() {
        let cond = ConditionSpec::PatienceMinimum {
            patience: 2,
            rollback: false,
        };
        let firing = cond.first_firing(&some(&[0.5, 0.6, 0.7])).unwrap();
        assert_eq!(firing.fired_round, 2);
        assert_eq!(firing.stop_round, 2);
    }

    #[test]
    fn equal_values_do_not_reset_patience() {
        let cond = ConditionSpec::PatienceMinimum {
            patience: 3,
            rollback: false,
        };
        // repeats of the minimum are not new minima
        let firing = cond.first_firing(&some(&[0.5, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!(firing.fired_round, 3);
    }

    #[test]
    fn threshold_fires_at_first_qualifying_round_randomized() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        runner
            .run(
                &(proptest::collection::vec(0.0f64..1.0, 1..20), 0.0f64..1.0),
                |(series, value)| {
                    let cond = ConditionSpec::Threshold {
                        direction: Direction::Leq,
                        value,
                    };
                    let wrapped: Vec<Option<f64>> = series.iter().map(|&v| Some(v)).collect();
                    let got = cond.first_firing(&wrapped).map(|f| f.stop_round);
                    let want = series.iter().position(|&v| v <= value);
                    prop_assert_eq!(got, want);
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ConditionSpec::ConsecutiveChange {
            count: 0,
            min_delta: 0.0
        }
        .validate()
        .is_err());
        assert!(ConditionSpec::ConsecutiveChange {
            count: 1,
            min_delta: -1.0
        }
        .validate()
        .is_err());
        assert!(ConditionSpec::WindowGradient {
            window: 0,
            epsilon: 0.1,
            aggregate: Aggregate::Mean,
            extremum: Extremum::Max
        }
        .validate()
        .is_err());
        assert!(ConditionSpec::PatienceMinimum {
            patience: 0,
            rollback: true
        }
        .validate()
        .is_err());
    }
}
