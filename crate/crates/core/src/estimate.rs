//! The three estimation drivers.
//!
//! Means and variances come straight from the available entries of each
//! feature. Every off-diagonal entry is solved on its own from the pair's
//! sufficient statistics, so the `p (p - 1) / 2` pairs run in parallel when
//! the `parallel` feature is enabled. Each pair writes a fixed slot, so the
//! result does not depend on the schedule.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cubic::{select_sigma12, CubicProblem, Fallback};
use crate::error::{DperError, FeatureRef, Result};
use crate::model::{EstimationResult, LabeledDataset, MaskedMatrix, PairDiagnostic, Regime};
use crate::stats::CenteredColumns;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateOptions {
    /// Clip negative eigenvalues of each assembled covariance to zero.
    pub psd_repair: bool,
}

/// Single-class estimate: available-case means and variances, and one
/// objective maximization per feature pair.
pub fn dper_single(data: &MaskedMatrix) -> Result<EstimationResult> {
    dper_single_with(data, EstimateOptions::default())
}

pub fn dper_single_with(data: &MaskedMatrix, opts: EstimateOptions) -> Result<EstimationResult> {
    let (means, cov, diagnostics) = estimate_block(data, None, None)?;
    finish(Regime::Single, means, vec![cov], diagnostics, opts)
}

/// Runs the single-class estimator on every class separately.
pub fn dper_multi_unequal(dataset: &LabeledDataset) -> Result<EstimationResult> {
    dper_multi_unequal_with(dataset, EstimateOptions::default())
}

pub fn dper_multi_unequal_with(dataset: &LabeledDataset, opts: EstimateOptions) -> Result<EstimationResult> {
    let g = dataset.n_classes();
    let p = dataset.data().n_features();
    let mut means = DMatrix::zeros(g, p);
    let mut covariances = Vec::with_capacity(g);
    let mut diagnostics = Vec::new();
    for class in 0..g {
        let subset = dataset.class_subset(class)?;
        let (m, cov, diag) = estimate_block(&subset, None, Some(class)).map_err(|e| tag_class(e, class))?;
        means.row_mut(class).copy_from(&m.row(0));
        covariances.push(cov);
        diagnostics.extend(diag);
    }
    finish(Regime::MultiUnequal, means, covariances, diagnostics, opts)
}

/// Per-class means with one covariance shared by all classes.
pub fn dper_multi_equal(dataset: &LabeledDataset) -> Result<EstimationResult> {
    dper_multi_equal_with(dataset, EstimateOptions::default())
}

pub fn dper_multi_equal_with(dataset: &LabeledDataset, opts: EstimateOptions) -> Result<EstimationResult> {
    let labels = (dataset.labels(), dataset.n_classes());
    let (means, cov, diagnostics) = estimate_block(dataset.data(), Some(labels), None)?;
    finish(Regime::MultiEqual, means, vec![cov], diagnostics, opts)
}

/// Dispatches on `regime`; `single` ignores the labels.
pub fn estimate(dataset: &LabeledDataset, regime: Regime, opts: EstimateOptions) -> Result<EstimationResult> {
    match regime {
        Regime::Single => dper_single_with(dataset.data(), opts),
        Regime::MultiUnequal => dper_multi_unequal_with(dataset, opts),
        Regime::MultiEqual => dper_multi_equal_with(dataset, opts),
    }
}

/// Covariance of features `i` and `j` over their complete pairs, centered at
/// the per-class available-case means and pooled over classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseDeletion {
    /// `s12 / A`, or `0.0` when there is no complete pair.
    pub value: f64,
    pub complete_pairs: u64,
}

impl CaseDeletion {
    pub fn is_empty(&self) -> bool {
        self.complete_pairs == 0
    }
}

pub fn case_deletion_sigma12(
    data: &MaskedMatrix,
    i: usize,
    j: usize,
    labels: Option<(&[usize], usize)>,
) -> Result<CaseDeletion> {
    let stats = crate::stats::pair_stats(data, i, j, labels)?;
    Ok(CaseDeletion {
        value: if stats.a == 0 {
            0.0
        } else {
            stats.s12 / stats.a as f64
        },
        complete_pairs: stats.a,
    })
}

fn tag_class(err: DperError, class: usize) -> DperError {
    match err {
        DperError::NoObservedData(at) => DperError::NoObservedData(FeatureRef {
            feature: at.feature,
            class: Some(class),
        }),
        other => other,
    }
}

type Block = (DMatrix<f64>, DMatrix<f64>, Vec<PairDiagnostic>);

fn estimate_block(
    data: &MaskedMatrix,
    labels: Option<(&[usize], usize)>,
    class_tag: Option<usize>,
) -> Result<Block> {
    let cols = CenteredColumns::new(data, labels)?;
    let p = cols.n_features();
    let g = cols.n_classes();
    let means = DMatrix::from_fn(g, p, |k, c| cols.mean(k, c));

    let pairs: Vec<(usize, usize)> = (1..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();

    #[cfg(feature = "parallel")]
    let diagnostics: Vec<PairDiagnostic> = pairs
        .par_iter()
        .map(|&(i, j)| solve_pair(&cols, i, j, class_tag))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let diagnostics: Vec<PairDiagnostic> = pairs
        .iter()
        .map(|&(i, j)| solve_pair(&cols, i, j, class_tag))
        .collect();

    let mut cov = DMatrix::zeros(p, p);
    for c in 0..p {
        cov[(c, c)] = cols.variance(c);
    }
    for d in &diagnostics {
        cov[(d.i, d.j)] = d.chosen;
        cov[(d.j, d.i)] = d.chosen;
    }
    Ok((means, cov, diagnostics))
}

fn solve_pair(cols: &CenteredColumns, i: usize, j: usize, class: Option<usize>) -> PairDiagnostic {
    let stats = cols.pair(i, j);
    let constant = cols.is_constant(i) || cols.is_constant(j);
    let problem = if constant {
        None
    } else {
        CubicProblem::from_stats(&stats)
    };
    match problem {
        Some(problem) => {
            let case_deletion = (stats.a > 0).then(|| stats.s12 / stats.a as f64);
            let sel = select_sigma12(&problem, case_deletion);
            PairDiagnostic {
                class,
                i,
                j,
                complete_pairs: stats.a,
                root_count: sel.root_count,
                candidates: sel.candidates,
                chosen: sel.chosen,
                fallback: sel.fallback,
                constant_feature: false,
            }
        }
        None => PairDiagnostic {
            class,
            i,
            j,
            complete_pairs: stats.a,
            root_count: 0,
            candidates: Vec::new(),
            chosen: 0.0,
            fallback: Fallback::Zero,
            constant_feature: true,
        },
    }
}

fn finish(
    regime: Regime,
    means: DMatrix<f64>,
    mut covariances: Vec<DMatrix<f64>>,
    diagnostics: Vec<PairDiagnostic>,
    opts: EstimateOptions,
) -> Result<EstimationResult> {
    let mut psd_repaired = false;
    if opts.psd_repair {
        for cov in &mut covariances {
            if let Some(fixed) = nearest_psd(cov) {
                *cov = fixed;
                psd_repaired = true;
            }
        }
    }
    Ok(EstimationResult {
        regime,
        means,
        covariances,
        diagnostics,
        psd_repaired,
    })
}

/// Eigenvalue-clipped projection of a symmetric matrix onto the PSD cone.
///
/// Returns `None` when no eigenvalue is negative. The result is mirrored from
/// its lower triangle so that it stays exactly symmetric.
pub fn nearest_psd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return None;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let p = out.nrows();
    for i in 0..p {
        out[(i, i)] = out[(i, i)].max(0.0);
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn labeled(rows: &[Vec<f64>], labels: Vec<usize>, g: usize) -> LabeledDataset {
        let m = MaskedMatrix::from_complete_rows(rows).unwrap();
        LabeledDataset::new(m, labels, (0..g).map(|k| format!("c{k}")).collect()).unwrap()
    }

    #[test]
    fn collinear_pair_gives_uncorrected_covariance() {
        let m = MaskedMatrix::from_complete_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let r = dper_single(&m).unwrap();
        assert_abs_diff_eq!(r.covariances[0][(1, 0)], 4.0 / 3.0, epsilon = 1e-10);
        assert_eq!(r.means[(0, 0)], 2.0);
        assert_eq!(r.means[(0, 1)], 4.0);
        r.check_invariants().unwrap();
    }

    #[test]
    fn single_feature_has_no_pairs() {
        let m = MaskedMatrix::from_rows(&[vec![Some(1.0)], vec![None], vec![Some(3.0)]]).unwrap();
        let r = dper_single(&m).unwrap();
        assert_eq!(r.covariances[0].shape(), (1, 1));
        assert_eq!(r.covariances[0][(0, 0)], 1.0);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn fully_missing_feature_is_reported() {
        let m = MaskedMatrix::from_rows(&[vec![Some(1.0), None], vec![Some(2.0), None]]).unwrap();
        let err = dper_single(&m).unwrap_err();
        assert!(matches!(
            err,
            DperError::NoObservedData(FeatureRef {
                feature: 1,
                class: None
            })
        ));
    }

    #[test]
    fn missing_feature_in_one_class_is_tagged() {
        let m = MaskedMatrix::from_rows(&[
            vec![Some(1.0), Some(1.0)],
            vec![Some(2.0), Some(3.0)],
            vec![Some(2.0), None],
        ])
        .unwrap();
        let ds = LabeledDataset::new(m, vec![0, 0, 1], vec!["a".into(), "b".into()]).unwrap();
        for err in [
            dper_multi_unequal(&ds).unwrap_err(),
            dper_multi_equal(&ds).unwrap_err(),
        ] {
            assert!(matches!(
                err,
                DperError::NoObservedData(FeatureRef {
                    feature: 1,
                    class: Some(1)
                })
            ));
        }
    }

    #[test]
    fn one_class_regimes_agree_with_single() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|k| {
                let x = k as f64;
                vec![x.sin(), (0.7 * x).cos() + 0.1 * x, (x * x) % 5.0]
            })
            .collect();
        let ds = labeled(&rows, vec![0; 12], 1);
        let single = dper_single(ds.data()).unwrap();
        let unequal = dper_multi_unequal(&ds).unwrap();
        let equal = dper_multi_equal(&ds).unwrap();
        assert_eq!(single.means, unequal.means);
        assert_eq!(single.covariances, unequal.covariances);
        assert_eq!(single.means, equal.means);
        assert_eq!(single.covariances, equal.covariances);
    }

    #[test]
    fn identical_classes_give_identical_matrices() {
        let base: Vec<Vec<f64>> = (0..9)
            .map(|k| vec![k as f64, ((k * 7) % 4) as f64, (k as f64).sqrt()])
            .collect();
        let rows: Vec<Vec<f64>> = base.iter().chain(base.iter()).cloned().collect();
        let labels = (0..18).map(|k| k / 9).collect();
        let r = dper_multi_unequal(&labeled(&rows, labels, 2)).unwrap();
        assert_eq!(r.covariances[0], r.covariances[1]);
    }

    #[test]
    fn shifted_class_leaves_pooled_covariance_unchanged() {
        let base: Vec<Vec<f64>> = (0..10)
            .map(|k| vec![(k as f64 * 1.3).sin(), k as f64 * 0.2, ((k * 3) % 7) as f64])
            .collect();
        let shifted: Vec<Vec<f64>> = base
            .iter()
            .map(|r| vec![r[0] + 5.0, r[1] - 2.0, r[2] + 0.5])
            .collect();
        let rows: Vec<Vec<f64>> = base.iter().chain(shifted.iter()).cloned().collect();
        let labels = (0..20).map(|k| k / 10).collect();
        let pooled = dper_multi_equal(&labeled(&rows, labels, 2)).unwrap();
        let single = dper_single(&MaskedMatrix::from_complete_rows(&base).unwrap()).unwrap();
        let diff = (&pooled.covariances[0] - &single.covariances[0]).abs().max();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn constant_feature_pairs_are_zero_and_flagged() {
        let m = MaskedMatrix::from_complete_rows(&[vec![1.0, 3.0], vec![1.0, 5.0], vec![1.0, 4.0]]).unwrap();
        let r = dper_single(&m).unwrap();
        assert_eq!(r.covariances[0][(0, 1)], 0.0);
        assert!(r.diagnostics[0].constant_feature);
        assert_eq!(r.diagnostics[0].fallback, Fallback::Zero);
    }

    #[test]
    fn case_deletion_of_collinear_data() {
        let m = MaskedMatrix::from_complete_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let cd = case_deletion_sigma12(&m, 0, 1, None).unwrap();
        assert_abs_diff_eq!(cd.value, 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn case_deletion_without_pairs_is_zero() {
        let m = MaskedMatrix::from_rows(&[vec![Some(1.0), None], vec![None, Some(2.0)]]).unwrap();
        let cd = case_deletion_sigma12(&m, 0, 1, None).unwrap();
        assert!(cd.is_empty());
        assert_eq!(cd.value, 0.0);
    }

    #[test]
    fn psd_repair_clips_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let fixed = nearest_psd(&m).unwrap();
        let eig = SymmetricEigen::new(fixed.clone());
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
        assert_eq!(fixed, fixed.transpose());
        assert!(nearest_psd(&DMatrix::<f64>::identity(3, 3)).is_none());
    }
}
