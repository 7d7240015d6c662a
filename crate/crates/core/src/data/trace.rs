//! Versioned run-trace format.
//!
//! A trace captures one active-learning run (one dataset, one model, one
//! split) as a sequence of per-round snapshots so every stopping criterion can
//! be evaluated offline on identical queried points and classifiers.
//!
//! On disk a trace is newline-delimited JSON: one header object, then one
//! object per [`IterationRecord`]. Each record line carries a checksum over
//! its canonical JSON body so corruption is caught and reported with the
//! failing round. An aborted run ends with a final `{"aborted": ...}` line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Current on-disk trace format version.
pub const TRACE_VERSION: u32 = 1;

/// Protocol parameters frozen into the trace header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub batch_size: usize,
    pub subsample_size: usize,
    pub reserve: usize,
    pub initial_size: usize,
    pub test_fraction: f64,
}

/// One queried instance: its row, the oracle's label, and the posterior the
/// classifier assigned *before* retraining on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedInstance {
    pub row: usize,
    pub oracle_label: u32,
    pub posterior: Vec<f64>,
}

/// Snapshot of one active-learning round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub round: usize,
    /// Number of labeled instances the recorded classifier was trained on.
    pub labels_used: usize,
    /// The batch selected this round (empty only when no query was possible).
    pub selected: Vec<SelectedInstance>,
    /// Rows of the evaluation subsample at this round, sorted.
    pub subsample_indices: Vec<usize>,
    /// Class posteriors on the subsample, aligned with `subsample_indices`.
    pub subsample_posteriors: Vec<Vec<f64>>,
    /// Predicted class ids on the subsample.
    pub subsample_predictions: Vec<u32>,
    /// Predicted class ids on the trace's fixed stop set.
    pub stopset_predictions: Vec<u32>,
    pub test_accuracy: f64,
}

/// A full recorded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub dataset_id: String,
    pub model_id: String,
    pub seed: u64,
    pub config: TraceConfig,
    /// Ordered class ids; posterior columns follow this order.
    pub classes: Vec<u32>,
    /// Fixed stop-set rows used for prediction-agreement criteria.
    pub stopset_indices: Vec<usize>,
    pub records: Vec<IterationRecord>,
    /// Set when the run aborted (learner failure); such traces are excluded
    /// from analysis.
    pub aborted: Option<String>,
}

impl RunTrace {
    /// Validates the structural invariants of a recorded trace.
    pub fn validate(&self) -> Result<()> {
        for (i, rec) in self.records.iter().enumerate() {
            if rec.round != i {
                return Err(Error::TraceFormat(format!(
                    "record {i} has round {}, expected contiguous rounds",
                    rec.round
                )));
            }
            if rec.subsample_posteriors.len() != rec.subsample_indices.len()
                || rec.subsample_predictions.len() != rec.subsample_indices.len()
            {
                return Err(Error::TraceFormat(format!(
                    "round {i}: subsample fields have inconsistent lengths"
                )));
            }
            if rec.stopset_predictions.len() != self.stopset_indices.len() {
                return Err(Error::TraceFormat(format!(
                    "round {i}: stop-set prediction length mismatch"
                )));
            }
            for p in rec
                .subsample_posteriors
                .iter()
                .chain(rec.selected.iter().map(|s| &s.posterior))
            {
                check_posterior(p, i)?;
            }
            if i + 1 < self.records.len() {
                let next = &self.records[i + 1];
                if next.labels_used != rec.labels_used + self.config.batch_size {
                    return Err(Error::TraceFormat(format!(
                        "labels_used must increase by the batch size between rounds {i} and {}",
                        i + 1
                    )));
                }
                if rec.selected.len() != self.config.batch_size {
                    return Err(Error::TraceFormat(format!(
                        "round {i}: only the final round may have a short batch"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_posterior(p: &[f64], round: usize) -> Result<()> {
    if p.iter().any(|&x| x < 0.0) {
        return Err(Error::TraceFormat(format!(
            "round {round}: negative posterior entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::TraceFormat(format!(
            "round {round}: posterior row sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    dataset_id: String,
    model_id: String,
    seed: u64,
    config: TraceConfig,
    classes: Vec<u32>,
    stopset_indices: Vec<usize>,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Serializes a record to one JSON line with an embedded checksum. The
/// checksum covers the canonical (key-sorted) JSON of the record itself.
fn record_line(rec: &IterationRecord) -> Result<String> {
    let value = serde_json::to_value(rec)?;
    let body = value.to_string();
    let sum = fnv1a64(body.as_bytes());
    let Value::Object(mut map) = value else {
        return Err(Error::TraceFormat(
            "record did not serialize to an object".into(),
        ));
    };
    map.insert("checksum".into(), Value::String(format!("{sum:016x}")));
    Ok(Value::Object(map).to_string())
}

fn parse_record_line(line: &str, index: usize) -> Result<IterationRecord> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::TraceRecord {
        round: index,
        msg: format!("unparseable record: {e}"),
    })?;
    let Value::Object(mut map) = value else {
        return Err(Error::TraceRecord {
            round: index,
            msg: "record is not an object".into(),
        });
    };
    let round = map
        .get("round")
        .and_then(Value::as_u64)
        .map(|r| r as usize)
        .unwrap_or(index);
    let Some(Value::String(stored)) = map.remove("checksum") else {
        return Err(Error::TraceRecord {
            round,
            msg: "missing checksum".into(),
        });
    };
    let body = Value::Object(map).to_string();
    let sum = format!("{:016x}", fnv1a64(body.as_bytes()));
    if sum != stored {
        return Err(Error::TraceRecord {
            round,
            msg: "checksum mismatch".into(),
        });
    }
    serde_json::from_str(&body).map_err(|e| Error::TraceRecord {
        round,
        msg: format!("invalid record fields: {e}"),
    })
}

/// Incremental trace writer: header first, then one record per round.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, trace_header: &RunTrace) -> Result<Self> {
        let header = Header {
            version: TRACE_VERSION,
            dataset_id: trace_header.dataset_id.clone(),
            model_id: trace_header.model_id.clone(),
            seed: trace_header.seed,
            config: trace_header.config.clone(),
            classes: trace_header.classes.clone(),
            stopset_indices: trace_header.stopset_indices.clone(),
        };
        let line = serde_json::to_string(&header)?;
        writeln!(out, "{line}")?;
        Ok(TraceWriter { out })
    }

    pub fn append(&mut self, rec: &IterationRecord) -> Result<()> {
        let line = record_line(rec)?;
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    /// Marks the trace aborted and consumes the writer.
    pub fn abort(mut self, reason: &str) -> Result<W> {
        let line = serde_json::to_string(&serde_json::json!({ "aborted": reason }))?;
        writeln!(self.out, "{line}")?;
        Ok(self.out)
    }

    pub fn finish(self) -> W {
        self.out
    }
}

/// Serializes a trace to its newline-delimited byte form.
pub fn serialize_trace(trace: &RunTrace) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut w = TraceWriter::new(&mut buf, trace)?;
    for rec in &trace.records {
        w.append(rec)?;
    }
    match &trace.aborted {
        Some(reason) => {
            w.abort(reason)?;
        }
        None => {
            w.finish();
        }
    }
    Ok(buf)
}

/// Parses a trace from a buffered reader, verifying version and checksums.
pub fn deserialize_trace<R: BufRead>(reader: R) -> Result<RunTrace> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::TraceFormat("empty trace stream".into()))??;
    let probe: Value = serde_json::from_str(&header_line)
        .map_err(|e| Error::TraceFormat(format!("unparseable header: {e}")))?;
    let version = probe
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::TraceFormat("header missing version".into()))?
        as u32;
    if version != TRACE_VERSION {
        return Err(Error::TraceVersion {
            expected: TRACE_VERSION,
            got: version,
        });
    }
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::TraceFormat(format!("invalid header: {e}")))?;

    let mut records = Vec::new();
    let mut aborted = None;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if aborted.is_some() {
            return Err(Error::TraceFormat("content after abort marker".into()));
        }
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&line) {
            if let Some(Value::String(reason)) = map.get("aborted") {
                aborted = Some(reason.clone());
                continue;
            }
        }
        records.push(parse_record_line(&line, i)?);
    }

    let trace = RunTrace {
        dataset_id: header.dataset_id,
        model_id: header.model_id,
        seed: header.seed,
        config: header.config,
        classes: header.classes,
        stopset_indices: header.stopset_indices,
        records,
        aborted,
    };
    trace.validate()?;
    Ok(trace)
}
