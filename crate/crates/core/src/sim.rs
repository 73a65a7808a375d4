//! Missing-data simulation: MCAR masks, normalization, synthetic Gaussian
//! classes and the error metric `r`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{DperError, FeatureRef, Result};
use crate::model::{EstimationResult, LabeledDataset, MaskedMatrix};

/// Re-draws allowed for a (class, feature) block that came out fully masked.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    rate: f64,
    seed: u64,
}

impl MaskSpec {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(DperError::InvalidInput(format!(
                "missing rate {rate} outside [0, 1)"
            )));
        }
        Ok(Self { rate, seed })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Uniform draw for cell `index` (row-major) on re-draw `stream` of `seed`.
///
/// Each draw occupies two 32-bit words of the ChaCha keystream, so a cell's
/// value depends only on `(seed, stream, index)`.
pub fn cell_uniform(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng.random::<f64>()
}

/// Masks each cell independently with probability `spec.rate()`.
///
/// Labels are never touched. A feature left with no observed entry inside a
/// class has that block re-drawn on successive streams, up to
/// [`MAX_REDRAWS`] times.
pub fn apply_mcar(dataset: &LabeledDataset, spec: &MaskSpec) -> Result<LabeledDataset> {
    let data = dataset.data();
    if !data.is_complete() {
        return Err(DperError::InvalidInput(
            "masking expects complete input data".into(),
        ));
    }
    if spec.rate == 0.0 {
        return Ok(dataset.clone());
    }
    let (n, p) = (data.n_rows(), data.n_features());
    let mut observed = vec![true; n * p];

    // Stream 0, read sequentially in row-major order, equals
    // cell_uniform(seed, 0, r * p + c).
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for r in 0..n {
        for c in 0..p {
            observed[c * n + r] = rng.random::<f64>() >= spec.rate;
        }
    }

    for class in 0..dataset.n_classes() {
        let rows = dataset.class_rows(class);
        for c in 0..p {
            let mut attempt = 0;
            while !rows.iter().any(|&r| observed[c * n + r]) {
                attempt += 1;
                if attempt > MAX_REDRAWS {
                    return Err(DperError::MaskInfeasible {
                        at: FeatureRef {
                            feature: c,
                            class: Some(class),
                        },
                        attempts: MAX_REDRAWS,
                    });
                }
                for &r in rows {
                    let u = cell_uniform(spec.seed, attempt as u64, (r * p + c) as u64);
                    observed[c * n + r] = u >= spec.rate;
                }
            }
        }
    }

    dataset.with_data(data.with_mask(observed)?)
}

/// Centers every feature and scales it to unit (population) variance over
/// its observed entries. Constant features are only centered.
pub fn normalize(dataset: &LabeledDataset) -> Result<LabeledDataset> {
    let data = dataset.data();
    let (n, p) = (data.n_rows(), data.n_features());
    let mut values = Vec::with_capacity(n * p);
    for c in 0..p {
        let col = data.column(c);
        let mask = data.column_mask(c);
        let count = mask.iter().filter(|&&o| o).count() as f64;
        let obs = || col.iter().zip(mask).filter(|(_, &o)| o).map(|(&v, _)| v);
        let mean = obs().sum::<f64>() / count;
        let sd = (obs().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        values.extend(col.iter().map(|&v| (v - mean) / scale));
    }
    let scaled = MaskedMatrix::from_columns(n, p, values, data.mask().to_vec())?;
    dataset.with_data(scaled)
}

/// One Gaussian class for [`synthetic_dataset`].
#[derive(Debug, Clone)]
pub struct SyntheticClass {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

/// Draws complete multivariate-normal classes, rows grouped by class.
pub fn synthetic_dataset(classes: &[SyntheticClass], seed: u64) -> Result<LabeledDataset> {
    let p = classes
        .first()
        .map(|c| c.mean.len())
        .ok_or_else(|| DperError::InvalidInput("no classes".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, class) in classes.iter().enumerate() {
        if class.mean.len() != p || class.cov.shape() != (p, p) {
            return Err(DperError::ShapeMismatch(format!(
                "class {k} parameters do not match p={p}"
            )));
        }
        let chol = class.cov.clone().cholesky().ok_or_else(|| {
            DperError::InvalidInput(format!("class {k} covariance is not positive definite"))
        })?;
        let l = chol.l();
        let mean = DVector::from_column_slice(&class.mean);
        for _ in 0..class.n {
            let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &mean + &l * z;
            rows.push(x.iter().copied().collect::<Vec<f64>>());
            labels.push(k);
        }
    }
    let data = MaskedMatrix::from_complete_rows(&rows)?;
    LabeledDataset::new(
        data,
        labels,
        (0..classes.len()).map(|k| format!("class_{k}")).collect(),
    )
}

/// Error metric: per-entry-averaged Frobenius errors of means and covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricR {
    pub r: f64,
    pub n_mu: usize,
    pub n_sigma: usize,
}

/// `||mu - mu_hat||_F / n_mu + ||Sigma - Sigma_hat||_F / n_Sigma`, with the
/// class means stacked into one block and, for per-class covariances, the
/// matrices stacked as well.
pub fn metric_r(
    truth_means: &DMatrix<f64>,
    truth_covs: &[DMatrix<f64>],
    estimate: &EstimationResult,
) -> Result<MetricR> {
    if truth_means.shape() != estimate.means.shape() {
        return Err(DperError::ShapeMismatch(format!(
            "means {:?} vs estimate {:?}",
            truth_means.shape(),
            estimate.means.shape()
        )));
    }
    if truth_covs.len() != estimate.covariances.len()
        || truth_covs
            .iter()
            .zip(&estimate.covariances)
            .any(|(t, e)| t.shape() != e.shape())
    {
        return Err(DperError::ShapeMismatch("covariance blocks differ".into()));
    }
    let n_mu = truth_means.len();
    let mean_err = (truth_means - &estimate.means).norm();
    let n_sigma: usize = truth_covs.iter().map(DMatrix::len).sum();
    let cov_sq: f64 = truth_covs
        .iter()
        .zip(&estimate.covariances)
        .map(|(t, e)| (t - e).norm_squared())
        .sum();
    Ok(MetricR {
        r: mean_err / n_mu as f64 + cov_sq.sqrt() / n_sigma as f64,
        n_mu,
        n_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Regime;

    fn grid(n: usize, p: usize) -> LabeledDataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..p).map(|c| (r * p + c) as f64 * 0.25).collect())
            .collect();
        LabeledDataset::single_class(MaskedMatrix::from_complete_rows(&rows).unwrap())
    }

    fn result(means: DMatrix<f64>, covs: Vec<DMatrix<f64>>) -> EstimationResult {
        EstimationResult {
            regime: Regime::Single,
            means,
            covariances: covs,
            diagnostics: Vec::new(),
            psd_repaired: false,
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        let ds = grid(7, 3);
        assert_eq!(apply_mcar(&ds, &MaskSpec::new(0.0, 9).unwrap()).unwrap(), ds);
    }

    #[test]
    fn masks_are_deterministic() {
        let ds = grid(50, 4);
        let spec = MaskSpec::new(0.5, 7).unwrap();
        assert_eq!(apply_mcar(&ds, &spec).unwrap(), apply_mcar(&ds, &spec).unwrap());
        let other = apply_mcar(&ds, &MaskSpec::new(0.5, 8).unwrap()).unwrap();
        assert_ne!(other, apply_mcar(&ds, &spec).unwrap());
    }

    #[test]
    fn sequential_stream_matches_keyed_cells() {
        let ds = grid(9, 5);
        let spec = MaskSpec::new(0.4, 123).unwrap();
        let masked = apply_mcar(&ds, &spec).unwrap();
        for r in 0..9 {
            for c in 0..5 {
                let expected = cell_uniform(123, 0, (r * 5 + c) as u64) >= 0.4;
                // no block is fully masked here, so stream 0 decides every cell
                if masked.data().column_mask(c).iter().any(|&o| o) {
                    assert_eq!(masked.data().is_observed(r, c), expected);
                }
            }
        }
    }

    #[test]
    fn redraw_keeps_one_entry_per_class() {
        let ds = grid(3, 2);
        let masked = apply_mcar(&ds, &MaskSpec::new(0.95, 1).unwrap()).unwrap();
        for c in 0..2 {
            assert!(masked.data().column_mask(c).iter().any(|&o| o));
        }
    }

    #[test]
    fn impossible_mask_is_reported() {
        let ds = grid(1, 1);
        let err = apply_mcar(&ds, &MaskSpec::new(0.999_999_999, 3).unwrap()).unwrap_err();
        assert!(matches!(err, DperError::MaskInfeasible { .. }));
    }

    #[test]
    fn rate_must_be_below_one() {
        assert!(MaskSpec::new(1.0, 0).is_err());
        assert!(MaskSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn masking_requires_complete_input() {
        let m = MaskedMatrix::from_rows(&[vec![Some(1.0)], vec![None]]).unwrap();
        assert!(apply_mcar(&LabeledDataset::single_class(m), &MaskSpec::new(0.2, 0).unwrap()).is_err());
    }

    #[test]
    fn metric_zero_for_exact_estimate() {
        let means = DMatrix::from_row_slice(1, 2, &[0.5, -1.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let m = metric_r(&means, &[cov.clone()], &result(means.clone(), vec![cov])).unwrap();
        assert_eq!(m.r, 0.0);
        assert_eq!((m.n_mu, m.n_sigma), (2, 4));
    }

    #[test]
    fn metric_unit_mean_error() {
        let truth = DMatrix::from_element(1, 1, 0.0);
        let cov = DMatrix::from_element(1, 1, 1.0);
        let est = result(DMatrix::from_element(1, 1, 1.0), vec![cov.clone()]);
        assert_eq!(metric_r(&truth, &[cov], &est).unwrap().r, 1.0);
    }

    #[test]
    fn metric_shape_mismatch() {
        let truth = DMatrix::from_element(1, 2, 0.0);
        let cov = DMatrix::from_element(2, 2, 1.0);
        let est = result(DMatrix::from_element(2, 2, 0.0), vec![cov.clone()]);
        assert!(matches!(
            metric_r(&truth, &[cov], &est),
            Err(DperError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn normalize_gives_unit_variance() {
        let ds = normalize(&grid(10, 2)).unwrap();
        let col = ds.data().column(1);
        let mean = col.iter().sum::<f64>() / 10.0;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 10.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
