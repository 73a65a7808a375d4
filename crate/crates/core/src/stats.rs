//! Per-feature and per-pair sufficient statistics.
//!
//! Means and variances are available-case: each feature uses every row where
//! it is observed. The pair sums `s11`, `s12`, `s22` run over the complete
//! pairs only but are centered at those available-case means, per class.

use crate::error::{DperError, FeatureRef, Result};
use crate::model::{MaskedMatrix, PairStats};

/// Sums longer than this are split in halves recursively.
pub const TREE_LEAF: usize = 4096;

/// Sums `f(0) + ... + f(len - 1)` componentwise.
///
/// Up to [`TREE_LEAF`] terms are added left to right; longer ranges are split
/// in halves and combined pairwise, which keeps the rounding error at
/// `O(log n)` leaves for very long columns. The order of operations depends
/// only on `len`.
pub fn tree_sum<const K: usize, F>(len: usize, f: &F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K],
{
    tree_sum_range(0, len, f)
}

fn tree_sum_range<const K: usize, F>(lo: usize, hi: usize, f: &F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K],
{
    if hi - lo <= TREE_LEAF {
        let mut acc = [0.0; K];
        for k in lo..hi {
            let term = f(k);
            for (a, t) in acc.iter_mut().zip(term) {
                *a += t;
            }
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        let left = tree_sum_range(lo, mid, f);
        let right = tree_sum_range(mid, hi, f);
        let mut out = left;
        for (o, r) in out.iter_mut().zip(right) {
            *o += r;
        }
        out
    }
}

/// Centering for [`available_variance`].
#[derive(Debug, Clone, Copy)]
pub enum Center<'a> {
    Value(f64),
    /// `centers[labels[row]]` is the center of `row`.
    PerClass {
        labels: &'a [usize],
        centers: &'a [f64],
    },
}

/// Mean of the observed entries of `feature` among `rows`.
pub fn available_mean(data: &MaskedMatrix, feature: usize, rows: &[usize]) -> Result<f64> {
    let col = data.column(feature);
    let mask = data.column_mask(feature);
    let [sum, count] = tree_sum(rows.len(), &|k| {
        let r = rows[k];
        if mask[r] {
            [col[r], 1.0]
        } else {
            [0.0, 0.0]
        }
    });
    if count == 0.0 {
        return Err(DperError::NoObservedData(FeatureRef { feature, class: None }));
    }
    Ok(sum / count)
}

/// Uncorrected variance of the observed entries of `feature` among `rows`
/// around `center`; the denominator is the observed count.
pub fn available_variance(
    data: &MaskedMatrix,
    feature: usize,
    rows: &[usize],
    center: Center<'_>,
) -> Result<f64> {
    let col = data.column(feature);
    let mask = data.column_mask(feature);
    let [ss, count] = tree_sum(rows.len(), &|k| {
        let r = rows[k];
        if mask[r] {
            let c = match center {
                Center::Value(c) => c,
                Center::PerClass { labels, centers } => centers[labels[r]],
            };
            let d = col[r] - c;
            [d * d, 1.0]
        } else {
            [0.0, 0.0]
        }
    });
    if count == 0.0 {
        return Err(DperError::NoObservedData(FeatureRef { feature, class: None }));
    }
    Ok(ss / count)
}

/// Per-class centered columns of a matrix, ready for pair statistics.
///
/// Missing cells hold `0.0` in `centered` and `0.0` in `weight`, so the pair
/// sums reduce to masked dot products with no branching per row.
#[derive(Debug, Clone)]
pub struct CenteredColumns {
    n: usize,
    p: usize,
    centered: Vec<f64>,
    weight: Vec<f64>,
    /// `G x p`, row-major.
    means: Vec<f64>,
    n_classes: usize,
    variance: Vec<f64>,
    observed: Vec<u64>,
    constant: Vec<bool>,
}

impl CenteredColumns {
    /// Centers every feature at its per-class available-case mean.
    ///
    /// With `labels = None` all rows form one class. Fails when a feature has
    /// no observed entry within some class.
    pub fn new(data: &MaskedMatrix, labels: Option<(&[usize], usize)>) -> Result<Self> {
        let n = data.n_rows();
        let p = data.n_features();
        let (labels, g): (Option<&[usize]>, usize) = match labels {
            Some((l, g)) => (Some(l), g),
            None => (None, 1),
        };
        let class_of = |r: usize| labels.map_or(0, |l| l[r]);

        let mut means = vec![0.0; g * p];
        let mut centered = vec![0.0; n * p];
        let mut weight = vec![0.0; n * p];
        let mut variance = vec![0.0; p];
        let mut observed = vec![0u64; p];
        let mut constant = vec![false; p];

        for c in 0..p {
            let col = data.column(c);
            let mask = data.column_mask(c);
            let mut sums = vec![[0.0f64; 2]; g];
            // First observed value per class, and whether every value matches it.
            let mut first: Vec<Option<f64>> = vec![None; g];
            let mut flat = vec![true; g];
            if g == 1 {
                sums[0] = tree_sum(n, &|r| if mask[r] { [col[r], 1.0] } else { [0.0, 0.0] });
            } else {
                // Per-class sums in row order, accumulated through the same tree.
                let per_class = tree_sum_classes(n, g, &|r| {
                    if mask[r] {
                        Some((class_of(r), col[r]))
                    } else {
                        None
                    }
                });
                sums = per_class;
            }
            for r in 0..n {
                if mask[r] {
                    let k = class_of(r);
                    match first[k] {
                        None => first[k] = Some(col[r]),
                        Some(v0) => flat[k] &= col[r] == v0,
                    }
                }
            }
            for (k, [sum, count]) in sums.iter().enumerate() {
                if *count == 0.0 {
                    return Err(DperError::NoObservedData(FeatureRef {
                        feature: c,
                        class: labels.map(|_| k),
                    }));
                }
                means[k * p + c] = sum / count;
            }
            let is_constant = flat.iter().all(|&f| f);
            constant[c] = is_constant;
            let base = c * n;
            for r in 0..n {
                if mask[r] {
                    weight[base + r] = 1.0;
                    if !is_constant {
                        centered[base + r] = col[r] - means[class_of(r) * p + c];
                    }
                }
            }
            let cen = &centered[base..base + n];
            let wt = &weight[base..base + n];
            let [ss, count] = tree_sum(n, &|r| [cen[r] * cen[r], wt[r]]);
            observed[c] = count as u64;
            variance[c] = if is_constant { 0.0 } else { ss / count };
        }

        Ok(Self {
            n,
            p,
            centered,
            weight,
            means,
            n_classes: g,
            variance,
            observed,
            constant,
        })
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Available-case mean of `feature` in `class`.
    pub fn mean(&self, class: usize, feature: usize) -> f64 {
        self.means[class * self.p + feature]
    }

    /// Pooled uncorrected available-case variance of `feature`.
    pub fn variance(&self, feature: usize) -> f64 {
        self.variance[feature]
    }

    pub fn observed(&self, feature: usize) -> u64 {
        self.observed[feature]
    }

    /// Whether every observed value of `feature` equals the others of its class.
    pub fn is_constant(&self, feature: usize) -> bool {
        self.constant[feature]
    }

    fn centered(&self, feature: usize) -> &[f64] {
        &self.centered[feature * self.n..(feature + 1) * self.n]
    }

    fn weight(&self, feature: usize) -> &[f64] {
        &self.weight[feature * self.n..(feature + 1) * self.n]
    }

    /// Sufficient statistics for the pair `(i, j)`.
    pub fn pair(&self, i: usize, j: usize) -> PairStats {
        let (ci, wi) = (self.centered(i), self.weight(i));
        let (cj, wj) = (self.centered(j), self.weight(j));
        let [a, s11, s12, s22] = tree_sum(self.n, &|r| {
            [
                wi[r] * wj[r],
                ci[r] * ci[r] * wj[r],
                ci[r] * cj[r],
                cj[r] * cj[r] * wi[r],
            ]
        });
        PairStats {
            a: a as u64,
            s11,
            s12,
            s22,
            sigma11: self.variance[i],
            sigma22: self.variance[j],
            n1_obs: self.observed[i],
            n2_obs: self.observed[j],
        }
    }

    /// `s12 / A`, the covariance over complete pairs, or `None` when `A = 0`.
    pub fn case_deletion(&self, i: usize, j: usize) -> Option<f64> {
        let stats = self.pair(i, j);
        (stats.a > 0).then(|| stats.s12 / stats.a as f64)
    }
}

/// Per-class `[sum, count]` over rows, each class summed through [`tree_sum`].
fn tree_sum_classes<F>(n: usize, g: usize, f: &F) -> Vec<[f64; 2]>
where
    F: Fn(usize) -> Option<(usize, f64)>,
{
    (0..g)
        .map(|k| {
            tree_sum(n, &|r| match f(r) {
                Some((class, v)) if class == k => [v, 1.0],
                _ => [0.0, 0.0],
            })
        })
        .collect()
}

/// Sufficient statistics for features `i` and `j`, optionally grouped by class.
///
/// `labels` carries the per-row class id and the class count.
pub fn pair_stats(
    data: &MaskedMatrix,
    i: usize,
    j: usize,
    labels: Option<(&[usize], usize)>,
) -> Result<PairStats> {
    let both = data.select_columns(&[i, j])?;
    let cols = CenteredColumns::new(&both, labels).map_err(|e| match e {
        DperError::NoObservedData(at) => DperError::NoObservedData(FeatureRef {
            feature: if at.feature == 0 { i } else { j },
            class: at.class,
        }),
        other => other,
    })?;
    Ok(cols.pair(0, 1))
}
