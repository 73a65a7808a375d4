use std::fmt;

use thiserror::Error;

/// Location of a feature that could not be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureRef {
    pub feature: usize,
    pub class: Option<usize>,
}

impl fmt::Display for FeatureRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            Some(class) => write!(f, "feature={} class={}", self.feature, class),
            None => write!(f, "feature={}", self.feature),
        }
    }
}

#[derive(Debug, Error)]
pub enum DperError {
    #[error("no observed data: {0}")]
    NoObservedData(FeatureRef),

    #[error("sigma12={sigma12} outside the open interval (-{bound}, {bound})")]
    Domain { sigma12: f64, bound: f64 },

    #[error("degenerate objective: every polynomial coefficient is zero")]
    DegenerateObjective,

    #[error("insufficient complete rows after listwise deletion: per-class counts {counts:?}")]
    InsufficientCompleteRows { counts: Vec<usize> },

    #[error("mask infeasible after {attempts} re-draws: {at}")]
    MaskInfeasible { at: FeatureRef, attempts: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("missing label at line {line}")]
    MissingLabel { line: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DperError {
    /// Stable machine-readable identifier for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            DperError::NoObservedData(_) => "no_observed_data",
            DperError::Domain { .. } => "domain",
            DperError::DegenerateObjective => "degenerate_objective",
            DperError::InsufficientCompleteRows { .. } => "insufficient_complete_rows",
            DperError::MaskInfeasible { .. } => "mask_infeasible",
            DperError::ShapeMismatch(_) => "shape_mismatch",
            DperError::Parse { .. } => "parse",
            DperError::MissingLabel { .. } => "missing_label",
            DperError::InvalidInput(_) => "invalid_input",
            DperError::Config(_) => "config",
            DperError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, DperError>;
