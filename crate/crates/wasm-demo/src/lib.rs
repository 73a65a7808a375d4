//! Browser bindings for three interactive views: the profile objective of
//! one feature pair, a bivariate simulation, and an Iris missing-rate sweep.
//!
//! Every export returns a JSON string; the plain functions underneath are
//! what the native tests call.

use dper::bench::{builtin_dataset, Method};
use dper::sim::{normalize, synthetic_dataset, SyntheticClass};
use dper::{
    apply_mcar, case_deletion_sigma12, classical_estimate, cubic_roots, dper_single, eta, metric_r,
    select_sigma12, CubicProblem, EstimateOptions, Fallback, MaskSpec, Regime,
};
use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct EtaCurve {
    pub bound: f64,
    pub sigma12: Vec<f64>,
    /// `None` where the objective is not finite.
    pub eta: Vec<Option<f64>>,
    pub roots: Vec<f64>,
    pub candidates: Vec<(f64, f64)>,
    pub chosen: f64,
    pub fallback: Fallback,
    pub coefficients: [f64; 4],
}

pub fn eta_curve_data(
    a: u32,
    s11: f64,
    s12: f64,
    s22: f64,
    sigma11: f64,
    sigma22: f64,
    points: usize,
) -> Result<EtaCurve, String> {
    let problem = CubicProblem::new(a as u64, s11, s12, s22, sigma11, sigma22).map_err(|e| e.to_string())?;
    let bound = problem.bound();
    let points = points.clamp(16, 4000);
    let sigma12: Vec<f64> = (1..points)
        .map(|k| bound * (2.0 * k as f64 / points as f64 - 1.0))
        .collect();
    let values = sigma12
        .iter()
        .map(|&x| eta(&problem, x).ok().filter(|v| v.is_finite()))
        .collect();
    let case_deletion = (a > 0).then(|| s12 / a as f64);
    let selection = select_sigma12(&problem, case_deletion);
    Ok(EtaCurve {
        bound,
        sigma12,
        eta: values,
        roots: cubic_roots(&problem).unwrap_or_default(),
        candidates: selection.candidates.iter().map(|c| (c.sigma12, c.eta)).collect(),
        chosen: selection.chosen,
        fallback: selection.fallback,
        coefficients: problem.coefficients(),
    })
}

#[derive(Debug, Serialize)]
pub struct Bivariate {
    pub truth: f64,
    pub complete_data: f64,
    pub dper: f64,
    pub case_deletion: f64,
    pub complete_pairs: u64,
    /// `(x, y, observed_x, observed_y)` for plotting.
    pub points: Vec<(f64, f64, bool, bool)>,
}

/// Draws `n` standard bivariate normal rows with correlation `rho`, masks
/// them at `rate` and compares covariance estimates.
pub fn bivariate_data(n: usize, rho: f64, rate: f64, seed: u64) -> Result<Bivariate, String> {
    if !(-0.99..=0.99).contains(&rho) {
        return Err("rho must lie in [-0.99, 0.99]".into());
    }
    let n = n.clamp(4, 20_000);
    let class = SyntheticClass {
        mean: vec![0.0, 0.0],
        cov: DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        n,
    };
    let complete = synthetic_dataset(&[class], seed).map_err(|e| e.to_string())?;
    let masked = apply_mcar(&complete, &MaskSpec::new(rate, seed).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let full = dper_single(complete.data()).map_err(|e| e.to_string())?;
    let est = dper_single(masked.data()).map_err(|e| e.to_string())?;
    let cd = case_deletion_sigma12(masked.data(), 0, 1, None).map_err(|e| e.to_string())?;
    let data = complete.data();
    let points = (0..n)
        .map(|r| {
            (
                data.get(r, 0).unwrap_or(0.0),
                data.get(r, 1).unwrap_or(0.0),
                masked.data().is_observed(r, 0),
                masked.data().is_observed(r, 1),
            )
        })
        .collect();
    Ok(Bivariate {
        truth: rho,
        complete_data: full.covariances[0][(0, 1)],
        dper: est.covariances[0][(0, 1)],
        case_deletion: cd.value,
        complete_pairs: cd.complete_pairs,
        points,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepLine {
    pub method: &'static str,
    /// Mean `r` per rate over the successful seeds.
    pub mean_r: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub rates: Vec<f64>,
    pub lines: Vec<SweepLine>,
}

/// Mean error `r` on normalized Iris for each method and missing rate.
pub fn iris_sweep_data(regime: &str, seeds: u32, rates: &[f64]) -> Result<Sweep, String> {
    let regime: Regime = regime.parse().map_err(|e: dper::DperError| e.to_string())?;
    let complete = normalize(&builtin_dataset("iris").expect("bundled")).map_err(|e| e.to_string())?;
    let truth = classical_estimate(&complete, regime).map_err(|e| e.to_string())?;
    let methods = [Method::Dper, Method::Listwise, Method::MeanImpute];
    let mut sums = vec![vec![(0.0, 0usize); rates.len()]; methods.len()];
    for (k, &rate) in rates.iter().enumerate() {
        for seed in 0..seeds.clamp(1, 50) as u64 {
            let spec = MaskSpec::new(rate, seed).map_err(|e| e.to_string())?;
            let Ok(masked) = apply_mcar(&complete, &spec) else {
                continue;
            };
            for (m, method) in methods.iter().enumerate() {
                let r = method
                    .run(&masked, regime, EstimateOptions::default())
                    .and_then(|est| metric_r(&truth.means, &truth.covariances, &est));
                if let Ok(r) = r {
                    sums[m][k].0 += r.r;
                    sums[m][k].1 += 1;
                }
            }
        }
    }
    Ok(Sweep {
        rates: rates.to_vec(),
        lines: methods
            .iter()
            .zip(sums)
            .map(|(method, cells)| SweepLine {
                method: method.as_str(),
                mean_r: cells
                    .iter()
                    .map(|&(s, c)| (c > 0).then(|| s / c as f64))
                    .collect(),
            })
            .collect(),
    })
}

fn to_js<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn eta_curve(
    a: u32,
    s11: f64,
    s12: f64,
    s22: f64,
    sigma11: f64,
    sigma22: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(eta_curve_data(a, s11, s12, s22, sigma11, sigma22, points))
}

#[wasm_bindgen]
pub fn bivariate(n: usize, rho: f64, rate: f64, seed: u64) -> Result<String, JsError> {
    to_js(bivariate_data(n, rho, rate, seed))
}

#[wasm_bindgen]
pub fn iris_sweep(regime: &str, seeds: u32, rates: Vec<f64>) -> Result<String, JsError> {
    to_js(iris_sweep_data(regime, seeds, &rates))
}
