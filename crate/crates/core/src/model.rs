//! Data model shared by the estimators, the baselines and the benchmark harness.
//!
//! Missingness is carried by an explicit boolean mask (`true` = observed).
//! Masked cells always hold `0.0` in the value buffer so that two matrices
//! with the same observed content compare equal.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cubic::{Candidate, Fallback};
use crate::error::{DperError, Result};

/// Dense `n x p` matrix with a per-cell observation mask, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl MaskedMatrix {
    /// Builds a matrix from column-major buffers.
    pub fn from_columns(n: usize, p: usize, mut values: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(DperError::InvalidInput(format!(
                "matrix must have at least one row and one column (got {n}x{p})"
            )));
        }
        if values.len() != n * p || observed.len() != n * p {
            return Err(DperError::ShapeMismatch(format!(
                "expected {} cells, got {} values and {} mask entries",
                n * p,
                values.len(),
                observed.len()
            )));
        }
        for (k, (v, &o)) in values.iter_mut().zip(&observed).enumerate() {
            if o {
                if !v.is_finite() {
                    return Err(DperError::InvalidInput(format!(
                        "non-finite observed value at row {}, column {}",
                        k % n,
                        k / n
                    )));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Self {
            n,
            p,
            values,
            observed,
        })
    }

    /// Builds a matrix from rows where `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(DperError::ShapeMismatch(format!(
                "row {bad} has {} cells, expected {p}",
                rows[bad].len()
            )));
        }
        let mut values = vec![0.0; n * p];
        let mut observed = vec![false; n * p];
        for (r, row) in rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    values[c * n + r] = *v;
                    observed[c * n + r] = true;
                }
            }
        }
        Self::from_columns(n, p, values, observed)
    }

    /// Builds a fully observed matrix from rows.
    pub fn from_complete_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| r.iter().copied().map(Some).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let k = col * self.n + row;
        self.observed[k].then(|| self.values[k])
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[col * self.n + row]
    }

    /// Column values; masked cells read as `0.0`.
    pub fn column(&self, col: usize) -> &[f64] {
        &self.values[col * self.n..(col + 1) * self.n]
    }

    pub fn column_mask(&self, col: usize) -> &[bool] {
        &self.observed[col * self.n..(col + 1) * self.n]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn missing_count(&self) -> usize {
        self.n * self.p - self.observed_count()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    /// Copy restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let m = rows.len();
        let mut values = Vec::with_capacity(m * self.p);
        let mut observed = Vec::with_capacity(m * self.p);
        for c in 0..self.p {
            let col = self.column(c);
            let mask = self.column_mask(c);
            for &r in rows {
                values.push(col[r]);
                observed.push(mask[r]);
            }
        }
        Self::from_columns(m, self.p, values, observed)
    }

    /// Copy restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(self.n * cols.len());
        let mut observed = Vec::with_capacity(self.n * cols.len());
        for &c in cols {
            values.extend_from_slice(self.column(c));
            observed.extend_from_slice(self.column_mask(c));
        }
        Self::from_columns(self.n, cols.len(), values, observed)
    }

    /// Same values with a replacement column-major mask. Cells newly masked are zeroed.
    pub fn with_mask(&self, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != self.observed.len() {
            return Err(DperError::ShapeMismatch("mask size differs from matrix".into()));
        }
        if observed
            .iter()
            .zip(&self.observed)
            .any(|(&new, &old)| new && !old)
        {
            return Err(DperError::InvalidInput(
                "mask would reveal a cell that is missing in the source".into(),
            ));
        }
        Self::from_columns(self.n, self.p, self.values.clone(), observed)
    }

    /// Column-major mask buffer.
    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    /// Rows as `Option` cells.
    pub fn to_rows(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n)
            .map(|r| (0..self.p).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

/// A masked matrix together with complete class labels `0..G`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    data: MaskedMatrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
    class_rows: Vec<Vec<usize>>,
}

impl LabeledDataset {
    pub fn new(data: MaskedMatrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != data.n_rows() {
            return Err(DperError::ShapeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                data.n_rows()
            )));
        }
        let g = class_names.len();
        let mut class_rows = vec![Vec::new(); g];
        for (row, &label) in labels.iter().enumerate() {
            if label >= g {
                return Err(DperError::InvalidInput(format!(
                    "label {label} at row {row} outside 0..{g}"
                )));
            }
            class_rows[label].push(row);
        }
        if let Some(empty) = class_rows.iter().position(Vec::is_empty) {
            return Err(DperError::InvalidInput(format!(
                "class {empty} ({}) has no rows",
                class_names[empty]
            )));
        }
        Ok(Self {
            data,
            labels,
            class_names,
            class_rows,
        })
    }

    /// Wraps unlabeled data as a one-class dataset.
    pub fn single_class(data: MaskedMatrix) -> Self {
        let n = data.n_rows();
        Self {
            data,
            labels: vec![0; n],
            class_names: vec!["all".to_string()],
            class_rows: vec![(0..n).collect()],
        }
    }

    pub fn data(&self) -> &MaskedMatrix {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_rows(&self, class: usize) -> &[usize] {
        &self.class_rows[class]
    }

    /// The rows of one class as their own matrix.
    pub fn class_subset(&self, class: usize) -> Result<MaskedMatrix> {
        self.data.select_rows(&self.class_rows[class])
    }

    /// Same labels over a different matrix of identical shape.
    pub fn with_data(&self, data: MaskedMatrix) -> Result<Self> {
        if data.n_rows() != self.data.n_rows() || data.n_features() != self.data.n_features() {
            return Err(DperError::ShapeMismatch(
                "replacement data has a different shape".into(),
            ));
        }
        Ok(Self {
            data,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            class_rows: self.class_rows.clone(),
        })
    }
}

/// Sufficient statistics for one feature pair, pooled over classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairStats {
    /// Number of rows where both features are observed.
    pub a: u64,
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
    /// Available-case uncorrected variances.
    pub sigma11: f64,
    pub sigma22: f64,
    pub n1_obs: u64,
    pub n2_obs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Single,
    #[serde(alias = "multi-unequal")]
    MultiUnequal,
    #[serde(alias = "multi-equal")]
    MultiEqual,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Single => "single",
            Regime::MultiUnequal => "multi_unequal",
            Regime::MultiEqual => "multi_equal",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = DperError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "single" => Ok(Regime::Single),
            "multi_unequal" => Ok(Regime::MultiUnequal),
            "multi_equal" => Ok(Regime::MultiEqual),
            other => Err(DperError::InvalidInput(format!("unknown regime '{other}'"))),
        }
    }
}

/// Per-pair record of how an off-diagonal entry was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDiagnostic {
    pub class: Option<usize>,
    pub i: usize,
    pub j: usize,
    pub complete_pairs: u64,
    pub root_count: usize,
    pub candidates: Vec<Candidate>,
    pub chosen: f64,
    pub fallback: Fallback,
    pub constant_feature: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub regime: Regime,
    /// `G x p`; a single row for the single-class regime.
    pub means: DMatrix<f64>,
    /// One matrix for `single`/`multi_equal`, one per class for `multi_unequal`.
    pub covariances: Vec<DMatrix<f64>>,
    pub diagnostics: Vec<PairDiagnostic>,
    pub psd_repaired: bool,
}

impl EstimationResult {
    pub fn n_features(&self) -> usize {
        self.means.ncols()
    }

    pub fn fallback_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.fallback != Fallback::None)
            .count()
    }

    /// Checks symmetry, diagonal sign and the Cauchy-Schwarz bound on every matrix.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (k, cov) in self.covariances.iter().enumerate() {
            let p = cov.nrows();
            for i in 0..p {
                if cov[(i, i)] < 0.0 {
                    return Err(format!("matrix {k}: negative diagonal at {i}"));
                }
                for j in 0..i {
                    if cov[(i, j)].to_bits() != cov[(j, i)].to_bits() {
                        return Err(format!("matrix {k}: asymmetric at ({i},{j})"));
                    }
                    let bound = cov[(i, i)] * cov[(j, j)];
                    if cov[(i, j)] * cov[(i, j)] > bound * (1.0 + 1e-12) {
                        return Err(format!("matrix {k}: |sigma_{i}{j}| exceeds the variance bound"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-feature summary produced by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureReport {
    pub feature: usize,
    pub observed: usize,
    pub constant: bool,
    pub fully_missing: bool,
}

/// Reports observed counts and constant / fully-missing columns.
pub fn validate(data: &MaskedMatrix) -> Vec<FeatureReport> {
    (0..data.n_features())
        .map(|c| {
            let mut observed = data
                .column(c)
                .iter()
                .zip(data.column_mask(c))
                .filter(|(_, &o)| o)
                .map(|(&v, _)| v);
            let first = observed.next();
            let (count, constant) = match first {
                None => (0, false),
                Some(v0) => {
                    let mut count = 1;
                    let mut constant = true;
                    for v in observed {
                        count += 1;
                        constant &= v == v0;
                    }
                    (count, constant)
                }
            };
            FeatureReport {
                feature: c,
                observed: count,
                constant,
                fully_missing: count == 0,
            }
        })
        .collect()
}

/// One row of a benchmark sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub rate: f64,
    pub seed: u64,
    pub method: String,
    pub regime: Regime,
    /// `None` when the run failed or exceeded its time budget.
    pub r: Option<f64>,
    pub status: String,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}
