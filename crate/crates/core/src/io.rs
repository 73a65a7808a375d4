//! CSV ingestion and output.
//!
//! Input is comma-delimited with a header row. Fields matching one of the
//! missing tokens (after trimming) become masked cells. An optional label
//! column supplies class names; classes are numbered in sorted name order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DperError, Result};
use crate::model::{LabeledDataset, MaskedMatrix};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: Option<String>,
    pub missing_tokens: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: None,
            missing_tokens: vec![String::new(), "NA".into(), "NaN".into()],
        }
    }
}

impl CsvOptions {
    pub fn with_label(label: impl Into<String>) -> Self {
        Self {
            label_column: Some(label.into()),
            ..Self::default()
        }
    }
}

/// A parsed file: the dataset plus what is needed to write it back.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub label_name: Option<String>,
    /// Position of the label column among all columns of the file.
    pub label_position: Option<usize>,
    pub dataset: LabeledDataset,
}

pub fn parse_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Table> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_csv_str(&text, opts)
}

pub fn parse_csv_str(text: &str, opts: &CsvOptions) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_position =
        match &opts.label_column {
            Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
                DperError::InvalidInput(format!("label column '{name}' not found in header"))
            })?),
            None => None,
        };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| Some(c) != label_position)
        .collect();
    if feature_cols.is_empty() {
        return Err(DperError::InvalidInput("no feature columns".into()));
    }

    let is_missing = |field: &str| opts.missing_tokens.iter().any(|t| t == field);
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        if let Some(lp) = label_position {
            let label = record.get(lp).unwrap_or("").trim();
            if label.is_empty() || is_missing(label) {
                return Err(DperError::MissingLabel { line });
            }
            raw_labels.push(label.to_string());
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let field = record.get(c).unwrap_or("").trim();
            if is_missing(field) {
                row.push(None);
                continue;
            }
            let value: f64 = field.parse().map_err(|_| DperError::Parse {
                line,
                column: c + 1,
                reason: format!("'{field}' is not a number"),
            })?;
            if value.is_nan() {
                row.push(None);
            } else if !value.is_finite() {
                return Err(DperError::Parse {
                    line,
                    column: c + 1,
                    reason: format!("'{field}' is not finite"),
                });
            } else {
                row.push(Some(value));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DperError::InvalidInput("no data rows".into()));
    }
    let data = MaskedMatrix::from_rows(&rows)?;

    let dataset = match label_position {
        None => LabeledDataset::single_class(data),
        Some(_) => {
            let mut ids: BTreeMap<&str, usize> = raw_labels.iter().map(|l| (l.as_str(), 0)).collect();
            for (k, id) in ids.values_mut().enumerate() {
                *id = k;
            }
            let labels = raw_labels.iter().map(|l| ids[l.as_str()]).collect();
            let names = ids.keys().map(|s| s.to_string()).collect();
            LabeledDataset::new(data, labels, names)?
        }
    };

    Ok(Table {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        label_name: label_position.map(|c| headers[c].clone()),
        label_position,
        dataset,
    })
}

fn csv_error(err: csv::Error, fallback_line: usize) -> DperError {
    let line = err.position().map_or(fallback_line, |p| p.line() as usize);
    DperError::Parse {
        line,
        column: 0,
        reason: err.to_string(),
    }
}

/// Writes `table` back as CSV; masked cells become empty fields and values
/// use the shortest representation that parses back to the same double.
pub fn write_csv<W: Write>(out: W, table: &Table) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let data = table.dataset.data();
    let width = table.feature_names.len() + usize::from(table.label_position.is_some());
    let cell_index = |col: usize| -> Option<usize> {
        match table.label_position {
            Some(lp) if col == lp => None,
            Some(lp) if col > lp => Some(col - 1),
            _ => Some(col),
        }
    };

    let header: Vec<&str> = (0..width)
        .map(|c| match cell_index(c) {
            None => table.label_name.as_deref().unwrap_or("label"),
            Some(f) => table.feature_names[f].as_str(),
        })
        .collect();
    writer.write_record(&header).map_err(to_io)?;

    let names = table.dataset.class_names();
    let labels = table.dataset.labels();
    for r in 0..data.n_rows() {
        let record: Vec<String> = (0..width)
            .map(|c| match cell_index(c) {
                None => names[labels[r]].clone(),
                Some(f) => data.get(r, f).map(|v| v.to_string()).unwrap_or_default(),
            })
            .collect();
        writer.write_record(&record).map_err(to_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn to_io(err: csv::Error) -> DperError {
    DperError::Io(std::io::Error::other(err.to_string()))
}
