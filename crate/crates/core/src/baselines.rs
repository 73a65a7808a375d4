//! Comparison estimators: listwise deletion and mean imputation, each
//! followed by the classical complete-data MLEs.

use nalgebra::DMatrix;

use crate::error::{DperError, FeatureRef, Result};
use crate::model::{EstimationResult, LabeledDataset, MaskedMatrix, Regime};
use crate::stats::available_mean;

/// Classical MLEs on fully observed data: sample means, uncorrected
/// covariances, or the class-centered pooled covariance for `multi_equal`.
pub fn classical_estimate(dataset: &LabeledDataset, regime: Regime) -> Result<EstimationResult> {
    let data = dataset.data();
    if !data.is_complete() {
        return Err(DperError::InvalidInput(
            "classical estimate needs complete data".into(),
        ));
    }
    let p = data.n_features();
    let groups: Vec<Vec<usize>> = match regime {
        Regime::Single => vec![(0..data.n_rows()).collect()],
        _ => (0..dataset.n_classes())
            .map(|g| dataset.class_rows(g).to_vec())
            .collect(),
    };

    let means = DMatrix::from_fn(groups.len(), p, |g, c| {
        let col = data.column(c);
        groups[g].iter().map(|&r| col[r]).sum::<f64>() / groups[g].len() as f64
    });

    let scatter = |rows: &[usize], g: usize| {
        let mut s = DMatrix::<f64>::zeros(p, p);
        for &r in rows {
            for i in 0..p {
                let di = data.column(i)[r] - means[(g, i)];
                for j in 0..=i {
                    s[(i, j)] += di * (data.column(j)[r] - means[(g, j)]);
                }
            }
        }
        s
    };

    let covariances = match regime {
        Regime::MultiEqual => {
            let mut total = DMatrix::<f64>::zeros(p, p);
            for (g, rows) in groups.iter().enumerate() {
                total += scatter(rows, g);
            }
            vec![mirror(total / data.n_rows() as f64)]
        }
        _ => groups
            .iter()
            .enumerate()
            .map(|(g, rows)| mirror(scatter(rows, g) / rows.len() as f64))
            .collect(),
    };

    Ok(EstimationResult {
        regime,
        means,
        covariances,
        diagnostics: Vec::new(),
        psd_repaired: false,
    })
}

fn mirror(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    for i in 0..p {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}

/// Drops every row with a missing entry, then applies the classical MLEs.
///
/// Each class (or the whole data for `single`) must keep at least two rows.
pub fn listwise_deletion_estimate(dataset: &LabeledDataset, regime: Regime) -> Result<EstimationResult> {
    let data = dataset.data();
    let p = data.n_features();
    let keep: Vec<usize> = (0..data.n_rows())
        .filter(|&r| (0..p).all(|c| data.is_observed(r, c)))
        .collect();

    let counts: Vec<usize> = match regime {
        Regime::Single => vec![keep.len()],
        _ => {
            let mut counts = vec![0; dataset.n_classes()];
            for &r in &keep {
                counts[dataset.labels()[r]] += 1;
            }
            counts
        }
    };
    if counts.iter().any(|&c| c < 2) {
        return Err(DperError::InsufficientCompleteRows { counts });
    }

    let reduced = LabeledDataset::new(
        data.select_rows(&keep)?,
        keep.iter().map(|&r| dataset.labels()[r]).collect(),
        dataset.class_names().to_vec(),
    )?;
    classical_estimate(&reduced, regime)
}

/// Fills each missing cell with its feature's available-case mean (per class
/// unless `single`), then applies the classical MLEs.
pub fn mean_impute_estimate(dataset: &LabeledDataset, regime: Regime) -> Result<EstimationResult> {
    let data = dataset.data();
    let (n, p) = (data.n_rows(), data.n_features());
    let groups: Vec<Vec<usize>> = match regime {
        Regime::Single => vec![(0..n).collect()],
        _ => (0..dataset.n_classes())
            .map(|g| dataset.class_rows(g).to_vec())
            .collect(),
    };

    let mut values = Vec::with_capacity(n * p);
    for c in 0..p {
        let mut col = data.column(c).to_vec();
        let mask = data.column_mask(c);
        for (g, rows) in groups.iter().enumerate() {
            let mean = available_mean(data, c, rows).map_err(|_| {
                DperError::NoObservedData(FeatureRef {
                    feature: c,
                    class: (regime != Regime::Single).then_some(g),
                })
            })?;
            for &r in rows {
                if !mask[r] {
                    col[r] = mean;
                }
            }
        }
        values.extend(col);
    }
    let filled = MaskedMatrix::from_columns(n, p, values, vec![true; n * p])?;
    classical_estimate(&dataset.with_data(filled)?, regime)
}
