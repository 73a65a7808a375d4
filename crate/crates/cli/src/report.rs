//! JSON documents written by the CLI: the estimate output and error lines.

use std::collections::BTreeMap;

use dper::io::Table;
use dper::{DperError, EstimationResult, Fallback, FeatureRef, PairDiagnostic, Regime};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl CliError {
    pub fn new(kind: &str, message: String) -> Self {
        Self {
            error: kind.to_string(),
            message,
            column: None,
            class: None,
            line: None,
        }
    }

    pub fn io(message: String) -> Self {
        Self::new("io", message)
    }

    pub fn plain(err: DperError) -> Self {
        let line = match &err {
            DperError::Parse { line, .. } | DperError::MissingLabel { line } => Some(*line),
            _ => None,
        };
        Self {
            line,
            ..Self::new(err.kind(), err.to_string())
        }
    }

    /// Like [`CliError::plain`], with feature and class indices replaced by
    /// the names found in `table`.
    pub fn from_dper(err: DperError, table: &Table) -> Self {
        let at: Option<FeatureRef> = match &err {
            DperError::NoObservedData(at) => Some(*at),
            DperError::MaskInfeasible { at, .. } => Some(*at),
            _ => None,
        };
        let mut out = Self::plain(err);
        if let Some(at) = at {
            let column = table.feature_names.get(at.feature).cloned();
            let class = at.class.and_then(|c| table.dataset.class_names().get(c).cloned());
            out.message = match (&column, &class) {
                (Some(col), Some(cls)) => format!("{}: column '{col}' in class '{cls}'", out.message),
                (Some(col), None) => format!("{}: column '{col}'", out.message),
                _ => out.message,
            };
            out.column = column;
            out.class = class;
        }
        out
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.error))
    }
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub parse_s: f64,
    pub estimate_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics<'a> {
    pub pairs_solved: usize,
    pub fallback_count: usize,
    /// Pair count per fallback kind, `none` included.
    pub fallbacks: BTreeMap<&'static str, usize>,
    /// Pair count per number of real roots of the polynomial.
    pub root_counts: BTreeMap<usize, usize>,
    pub constant_feature_pairs: usize,
    pub pairs: &'a [PairDiagnostic],
}

#[derive(Debug, Serialize)]
pub struct EstimateDocument<'a> {
    pub regime: Regime,
    pub n_rows: usize,
    pub n_features: usize,
    pub feature_names: &'a [String],
    /// Names of the rows of `means` and, per class, of `covariances`.
    pub classes: Vec<String>,
    pub means: Vec<Vec<f64>>,
    /// Row-major matrices.
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub psd_repaired: bool,
    pub diagnostics: Diagnostics<'a>,
    pub timing: Timing,
}

fn fallback_name(f: Fallback) -> &'static str {
    match f {
        Fallback::None => "none",
        Fallback::Boundary => "boundary",
        Fallback::CaseDeletion => "case_deletion",
        Fallback::Zero => "zero",
    }
}

impl<'a> EstimateDocument<'a> {
    pub fn new(table: &'a Table, result: &'a EstimationResult, parse_s: f64, estimate_s: f64) -> Self {
        let classes = match result.regime {
            Regime::Single => vec!["all".to_string()],
            _ => table.dataset.class_names().to_vec(),
        };
        let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        let mut fallbacks = BTreeMap::new();
        let mut root_counts = BTreeMap::new();
        for d in &result.diagnostics {
            *fallbacks.entry(fallback_name(d.fallback)).or_insert(0) += 1;
            *root_counts.entry(d.root_count).or_insert(0) += 1;
        }
        Self {
            regime: result.regime,
            n_rows: table.dataset.data().n_rows(),
            n_features: table.dataset.data().n_features(),
            feature_names: &table.feature_names,
            classes,
            means: rows(&result.means),
            covariances: result.covariances.iter().map(rows).collect(),
            psd_repaired: result.psd_repaired,
            diagnostics: Diagnostics {
                pairs_solved: result.diagnostics.len(),
                fallback_count: result.fallback_count(),
                fallbacks,
                root_counts,
                constant_feature_pairs: result.diagnostics.iter().filter(|d| d.constant_feature).count(),
                pairs: &result.diagnostics,
            },
            timing: Timing { parse_s, estimate_s },
        }
    }
}
