//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use dper::{CubicProblem, LabeledDataset, MaskedMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-major complete data with `g` classes, correlated features and
/// class-specific offsets.
pub fn random_complete(seed: u64, n: usize, p: usize, g: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<Vec<f64>> = (0..g)
        .map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let mix: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let class = if r < g { r } else { rng.random_range(0..g) };
        let z: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let row = (0..p)
            .map(|i| offsets[class][i] + (0..p).map(|k| mix[i][k] * z[k]).sum::<f64>())
            .collect();
        rows.push(row);
        labels.push(class);
    }
    (rows, labels)
}

pub fn labeled(rows: &[Vec<f64>], labels: &[usize], g: usize) -> LabeledDataset {
    let m = MaskedMatrix::from_complete_rows(rows).unwrap();
    LabeledDataset::new(m, labels.to_vec(), (0..g).map(|k| format!("c{k}")).collect()).unwrap()
}

pub fn mean_of(rows: &[&Vec<f64>]) -> Vec<f64> {
    let p = rows[0].len();
    (0..p)
        .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Sum of outer products of rows centered at `mean`.
pub fn scatter(rows: &[&Vec<f64>], mean: &[f64]) -> Vec<Vec<f64>> {
    let p = mean.len();
    let mut s = vec![vec![0.0; p]; p];
    for r in rows {
        for i in 0..p {
            for j in 0..p {
                s[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    s
}

/// Uncorrected sample covariance.
pub fn sample_cov(rows: &[&Vec<f64>]) -> Vec<Vec<f64>> {
    let mean = mean_of(rows);
    let n = rows.len() as f64;
    scatter(rows, &mean)
        .into_iter()
        .map(|r| r.into_iter().map(|v| v / n).collect())
        .collect()
}

/// Class-centered scatter pooled over classes, divided by the total count.
pub fn pooled_cov(rows: &[Vec<f64>], labels: &[usize], g: usize) -> Vec<Vec<f64>> {
    let p = rows[0].len();
    let mut total = vec![vec![0.0; p]; p];
    for class in 0..g {
        let members: Vec<&Vec<f64>> = rows
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r)
            .collect();
        let s = scatter(&members, &mean_of(&members));
        for i in 0..p {
            for j in 0..p {
                total[i][j] += s[i][j];
            }
        }
    }
    let n = rows.len() as f64;
    total
        .into_iter()
        .map(|r| r.into_iter().map(|v| v / n).collect())
        .collect()
}

pub fn class_rows<'a>(rows: &'a [Vec<f64>], labels: &[usize], class: usize) -> Vec<&'a Vec<f64>> {
    rows.iter()
        .zip(labels)
        .filter(|(_, &l)| l == class)
        .map(|(r, _)| r)
        .collect()
}

pub fn max_abs_diff(m: &nalgebra::DMatrix<f64>, oracle: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in oracle.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((m[(i, j)] - v).abs());
        }
    }
    worst
}

/// Independent MCAR mask (true = observed) from its own generator.
pub fn random_mask(seed: u64, n: usize, p: usize, rate: f64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n)
        .map(|_| (0..p).map(|_| rng.random::<f64>() >= rate).collect())
        .collect()
}

pub fn apply_mask(rows: &[Vec<f64>], mask: &[Vec<bool>]) -> MaskedMatrix {
    let masked: Vec<Vec<Option<f64>>> = rows
        .iter()
        .zip(mask)
        .map(|(r, m)| r.iter().zip(m).map(|(&v, &o)| o.then_some(v)).collect())
        .collect();
    MaskedMatrix::from_rows(&masked).unwrap()
}

/// Objective written out term by term, independent of the library.
pub fn eta_literal(a: f64, s11: f64, s12: f64, s22: f64, v11: f64, v22: f64, x: f64) -> f64 {
    let conditional_var = v22 - x.powi(2) / v11;
    let quadratic = s22 - 2.0 * (x / v11) * s12 + (x.powi(2) / v11.powi(2)) * s11;
    -(a / 2.0) * conditional_var.ln() - quadratic / (2.0 * conditional_var)
}

pub fn eta_of(p: &CubicProblem, x: f64) -> f64 {
    eta_literal(p.a as f64, p.s11, p.s12, p.s22, p.sigma11, p.sigma22, x)
}

/// Two-level grid search for the argmax of the objective on the open interval.
pub fn grid_argmax(p: &CubicProblem) -> f64 {
    let bound = (p.sigma11 * p.sigma22).sqrt();
    let edge = 1.0 - 1e-6;
    let coarse = 20_000;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..=coarse {
        let t = -edge + 2.0 * edge * k as f64 / coarse as f64;
        let v = eta_of(p, t * bound);
        if v > best.0 {
            best = (v, t);
        }
    }
    let step = 2.0 * edge / coarse as f64;
    let (lo, hi) = ((best.1 - 2.0 * step).max(-edge), (best.1 + 2.0 * step).min(edge));
    let fine = 20_000;
    for k in 0..=fine {
        let t = lo + (hi - lo) * k as f64 / fine as f64;
        let v = eta_of(p, t * bound);
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1 * bound
}

pub fn poly(p: &CubicProblem, x: f64) -> f64 {
    let a = p.a as f64;
    let v = p.sigma11 * p.sigma22;
    p.s12 * v + (v * a - p.s22 * p.sigma11 - p.s11 * p.sigma22) * x + p.s12 * x * x - a * x * x * x
}

pub fn max_coeff(p: &CubicProblem) -> f64 {
    p.coefficients().iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

/// Roots located by bisection on every sign change of a uniform grid.
pub fn bisection_roots(p: &CubicProblem, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let h = (hi - lo) / points as f64;
    let mut x0 = lo;
    let mut f0 = poly(p, x0);
    for k in 1..=points {
        let x1 = lo + h * k as f64;
        let f1 = poly(p, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = poly(p, m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Pair sums from `a` simulated complete pairs with correlation `rho`, plus
/// variances that include extra single-feature rows.
pub fn random_problem(rng: &mut ChaCha8Rng, a: u64) -> CubicProblem {
    let scale1: f64 = rng.random_range(0.2..5.0);
    let scale2: f64 = rng.random_range(0.2..5.0);
    let rho: f64 = rng.random_range(-0.95..0.95);
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for _ in 0..a {
        let z1: f64 = rng.random_range(-1.0..1.0) * 1.7;
        let z2: f64 = rho * z1 + (1.0 - rho * rho).sqrt() * rng.random_range(-1.0..1.0) * 1.7;
        s11 += (scale1 * z1).powi(2);
        s22 += (scale2 * z2).powi(2);
        s12 += scale1 * z1 * scale2 * z2;
    }
    let sigma11 = scale1 * scale1 * rng.random_range(0.5..1.5);
    let sigma22 = scale2 * scale2 * rng.random_range(0.5..1.5);
    CubicProblem::new(a, s11, s12, s22, sigma11, sigma22).unwrap()
}

/// `A = 0` with synthetic Cauchy-Schwarz-consistent sums.
pub fn random_quadratic_problem(rng: &mut ChaCha8Rng) -> CubicProblem {
    let s11: f64 = rng.random_range(0.1..20.0);
    let s22: f64 = rng.random_range(0.1..20.0);
    let s12 = rng.random_range(-0.99..0.99) * (s11 * s22).sqrt();
    let sigma11: f64 = rng.random_range(0.1..4.0);
    let sigma22: f64 = rng.random_range(0.1..4.0);
    CubicProblem::new(0, s11, s12, s22, sigma11, sigma22).unwrap()
}
