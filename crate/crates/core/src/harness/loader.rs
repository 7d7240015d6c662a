//! Dataset ingestion: dense CSV (with a header and a named label column) and
//! sparse svmlight files. Class labels are remapped to dense 0..C-1 ids with
//! the original names recorded on the dataset.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Svmlight,
}

/// Loads a dataset from disk. `label` names the CSV label column and is
/// ignored for svmlight files (their label leads each line).
pub fn load_dataset(path: &Path, format: DataFormat, label: Option<&str>) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    match format {
        DataFormat::Csv => {
            let column = label.ok_or_else(|| {
                Error::InvalidArgument("csv ingestion needs a label column".into())
            })?;
            load_csv(File::open(path)?, &name, column)
        }
        DataFormat::Svmlight => load_svmlight(File::open(path)?, &name),
    }
}

/// Maps raw label strings to dense ids. Numeric label sets sort numerically,
/// anything else lexicographically, so ids are stable across loads.
fn dense_label_ids(raw: &[String]) -> (Vec<u32>, Vec<String>) {
    let mut distinct: Vec<String> = raw.to_vec();
    distinct.sort();
    distinct.dedup();
    let all_numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = all_numeric {
        let mut pairs: Vec<(f64, String)> =
            nums.into_iter().zip(distinct.iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        distinct = pairs.into_iter().map(|(_, s)| s).collect();
    }
    let index: BTreeMap<&str, u32> = distinct
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let ids = raw.iter().map(|s| index[s.as_str()]).collect();
    (ids, distinct)
}

pub fn load_csv<R: Read>(reader: R, name: &str, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("label column '{label_column}' not found"),
        })?;
    let arity = headers.len();
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != arity {
            return Err(Error::Parse {
                line,
                msg: format!("expected {arity} fields, got {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                if field.trim().is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: "missing label".into(),
                    });
                }
                raw_labels.push(field.trim().to_string());
            } else {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("feature '{}' is not numeric", field),
                })?;
                values.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyInput(format!("csv file for dataset {name}")));
    }
    let (labels, class_names) = dense_label_ids(&raw_labels);
    let rows = labels.len();
    let mut dataset = Dataset::new(name, FeatureMatrix::dense(rows, arity - 1, values)?, labels)?;
    dataset.class_names = Some(class_names);
    Ok(dataset)
}

pub fn load_svmlight<R: Read>(reader: R, name: &str) -> Result<Dataset> {
    let reader = BufReader::new(reader);
    let mut raw_labels = Vec::new();
    let mut indptr = vec![0usize];
    let mut indices: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut max_col = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label = tokens.next().ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "missing label".into(),
        })?;
        raw_labels.push(label.to_string());
        let mut row: Vec<(usize, f64)> = Vec::new();
        for token in tokens {
            if token.starts_with("qid:") {
                continue;
            }
            let (idx, val) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("malformed feature '{token}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("feature index '{idx}' is not an integer"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "svmlight feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("feature value '{val}' is not numeric"),
            })?;
            row.push((idx - 1, val));
        }
        row.sort_by_key(|&(c, _)| c);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                line: line_no,
                msg: "duplicate feature index".into(),
            });
        }
        if let Some(&(last, _)) = row.last() {
            max_col = max_col.max(last + 1);
        }
        for (c, v) in row {
            indices.push(c);
            values.push(v);
        }
        indptr.push(indices.len());
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyInput(format!(
            "svmlight file for dataset {name}"
        )));
    }
    let (labels, class_names) = dense_label_ids(&raw_labels);
    let rows = labels.len();
    let mut dataset = Dataset::new(
        name,
        FeatureMatrix::sparse(rows, max_col.max(1), indptr, indices, values)?,
        labels,
    )?;
    dataset.class_names = Some(class_names);
    Ok(dataset)
}
