//! Direct maximum-likelihood estimation of means and covariance matrices
//! from data with randomly missing entries.
//!
//! Each off-diagonal covariance entry is obtained from one feature pair at a
//! time by maximizing a one-dimensional profile likelihood, whose stationary
//! points are the real roots of a cubic. No imputation and no iteration over
//! the data are involved.
//!
//! ```
//! use dper::{dper_single, MaskedMatrix};
//!
//! let data = MaskedMatrix::from_rows(&[
//!     vec![Some(1.0), Some(2.1)],
//!     vec![Some(2.0), None],
//!     vec![Some(3.0), Some(5.9)],
//!     vec![None, Some(8.2)],
//! ])
//! .unwrap();
//! let est = dper_single(&data).unwrap();
//! assert_eq!(est.covariances[0][(0, 1)], est.covariances[0][(1, 0)]);
//! ```

pub mod baselines;
pub mod bench;
pub mod cubic;
pub mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod sim;
pub mod stats;

pub use baselines::{classical_estimate, listwise_deletion_estimate, mean_impute_estimate};
pub use cubic::{cubic_roots, eta, select_sigma12, Candidate, CubicProblem, Fallback, RootSelection};
pub use error::{DperError, FeatureRef, Result};
pub use estimate::{
    case_deletion_sigma12, dper_multi_equal, dper_multi_equal_with, dper_multi_unequal,
    dper_multi_unequal_with, dper_single, dper_single_with, estimate, nearest_psd, CaseDeletion,
    EstimateOptions,
};
pub use model::{
    validate, BenchReport, BenchRow, EstimationResult, FeatureReport, LabeledDataset, MaskedMatrix,
    PairDiagnostic, PairStats, Regime,
};
pub use sim::{apply_mcar, metric_r, MaskSpec, MetricR};
pub use stats::{available_mean, available_variance, pair_stats, Center};
