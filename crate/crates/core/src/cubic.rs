//! Profile objective for one off-diagonal covariance entry and its maximizer.
//!
//! With the means and the two variances fixed at their estimates, the
//! log-likelihood depends on `sigma12` only through
//!
//! ```text
//! eta(s) = -(A/2) ln(sigma22 - s^2/sigma11)
//!          - (s22 - 2 (s/sigma11) s12 + (s/sigma11)^2 s11) / (2 (sigma22 - s^2/sigma11))
//! ```
//!
//! on the open interval `|s| < sqrt(sigma11 sigma22)`. Its stationary points
//! are the real roots of
//!
//! ```text
//! s12 sigma11 sigma22 + (sigma11 sigma22 A - s22 sigma11 - s11 sigma22) s + s12 s^2 - A s^3
//! ```
//!
//! which degenerates to a quadratic when `A = 0`.

use serde::Serialize;

use crate::error::{DperError, Result};
use crate::model::PairStats;

/// Number of Newton steps applied to every closed-form root.
const POLISH_STEPS: usize = 2;
/// Relative tolerance under which two objective values count as a tie.
pub const ETA_TIE_RTOL: f64 = 1e-9;
/// Fallback estimates are clamped to this fraction of `sqrt(sigma11 sigma22)`.
pub const FALLBACK_CLAMP: f64 = 0.999;
/// Relative tolerance for detecting a pair whose supremum sits on the boundary.
const BOUNDARY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicProblem {
    pub a: u64,
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
    pub sigma11: f64,
    pub sigma22: f64,
}

impl CubicProblem {
    pub fn new(a: u64, s11: f64, s12: f64, s22: f64, sigma11: f64, sigma22: f64) -> Result<Self> {
        if !(sigma11 > 0.0 && sigma22 > 0.0) || !sigma11.is_finite() || !sigma22.is_finite() {
            return Err(DperError::InvalidInput(format!(
                "variances must be positive and finite (got {sigma11}, {sigma22})"
            )));
        }
        if ![s11, s12, s22].iter().all(|v| v.is_finite()) {
            return Err(DperError::InvalidInput("pair sums must be finite".into()));
        }
        Ok(Self {
            a,
            s11,
            s12,
            s22,
            sigma11,
            sigma22,
        })
    }

    /// `None` when either variance is zero.
    pub fn from_stats(stats: &PairStats) -> Option<Self> {
        Self::new(
            stats.a,
            stats.s11,
            stats.s12,
            stats.s22,
            stats.sigma11,
            stats.sigma22,
        )
        .ok()
    }

    /// Half-width of the admissible interval, `sqrt(sigma11 sigma22)`.
    pub fn bound(&self) -> f64 {
        (self.sigma11 * self.sigma22).sqrt()
    }

    /// Coefficients `[c0, c1, c2, c3]` of the stationarity polynomial in `sigma12`.
    pub fn coefficients(&self) -> [f64; 4] {
        let a = self.a as f64;
        let v = self.sigma11 * self.sigma22;
        [
            self.s12 * v,
            v * a - self.s22 * self.sigma11 - self.s11 * self.sigma22,
            self.s12,
            -a,
        ]
    }

    pub fn polynomial(&self, sigma12: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coefficients();
        ((c3 * sigma12 + c2) * sigma12 + c1) * sigma12 + c0
    }
}

/// Profile objective at `sigma12`, with the additive constant set to zero.
pub fn eta(problem: &CubicProblem, sigma12: f64) -> Result<f64> {
    let p = problem;
    let bound = p.bound();
    let cond = p.sigma22 - sigma12 * sigma12 / p.sigma11;
    if sigma12.is_nan() || sigma12.abs() >= bound || cond <= 0.0 {
        return Err(DperError::Domain { sigma12, bound });
    }
    let ratio = sigma12 / p.sigma11;
    let quad = p.s22 - 2.0 * ratio * p.s12 + ratio * ratio * p.s11;
    let log_term = if p.a == 0 {
        0.0
    } else {
        -(p.a as f64) / 2.0 * cond.ln()
    };
    Ok(log_term - quad / (2.0 * cond))
}

/// All distinct real roots of the stationarity polynomial, ascending.
pub fn cubic_roots(problem: &CubicProblem) -> Result<Vec<f64>> {
    // Work in t = sigma12 / sqrt(sigma11 sigma22) so the interval is (-1, 1),
    // then normalize by the largest coefficient.
    let s = problem.bound();
    let [c0, c1, c2, c3] = problem.coefficients();
    let mut d = [c0, c1 * s, c2 * s * s, c3 * s * s * s];
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err(DperError::DegenerateObjective);
    }
    for x in &mut d {
        *x /= scale;
    }
    let mut roots = real_roots(d);
    for t in &mut roots {
        *t = polish(&d, *t);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * (1.0 + a.abs()));
    Ok(roots.into_iter().map(|t| t * s).collect())
}

/// Real roots of `d0 + d1 t + d2 t^2 + d3 t^3` (not all coefficients zero).
fn real_roots(d: [f64; 4]) -> Vec<f64> {
    let [d0, d1, d2, d3] = d;
    if d3 != 0.0 {
        cubic_real_roots(d2 / d3, d1 / d3, d0 / d3)
    } else if d2 != 0.0 {
        quadratic_real_roots(d2, d1, d0)
    } else if d1 != 0.0 {
        vec![-d0 / d1]
    } else {
        Vec::new()
    }
}

/// Real roots of `a t^2 + b t + c` with `a != 0`.
fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    // Avoids cancellation between -b and the square root.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        // b == 0 and c == 0
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Real roots of the monic cubic `t^3 + a t^2 + b t + c`.
fn cubic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let q3 = q * q * q;
    let shift = a / 3.0;
    if r * r < q3 {
        // Three distinct real roots: trigonometric form.
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let tau = std::f64::consts::TAU;
        vec![
            m * (theta / 3.0).cos() - shift,
            m * ((theta + tau) / 3.0).cos() - shift,
            m * ((theta - tau) / 3.0).cos() - shift,
        ]
    } else {
        // One simple real root (Cardano), possibly plus a double root when
        // the discriminant vanishes; the deflated quadratic recovers it.
        let big = -r.signum() * (r.abs() + (r * r - q3).max(0.0).sqrt()).cbrt();
        let small = if big == 0.0 { 0.0 } else { q / big };
        let mut x = big + small - shift;
        let monic = [c, b, a, 1.0];
        x = polish(&monic, x);
        // t^3 + a t^2 + b t + c = (t - x)(t^2 + e1 t + e0)
        let e1 = a + x;
        let e0 = b + x * e1;
        let mut roots = vec![x];
        let disc = e1 * e1 - 4.0 * e0;
        if disc >= -1e-12 * (1.0 + e1 * e1 + e0.abs()) {
            roots.extend(quadratic_real_roots(1.0, e1, e0.min(e1 * e1 / 4.0)));
        }
        roots
    }
}

/// Newton steps on `d0 + d1 t + d2 t^2 + d3 t^3`, keeping a step only if it
/// does not increase the residual.
fn polish(d: &[f64; 4], mut t: f64) -> f64 {
    let eval = |t: f64| {
        let v = ((d[3] * t + d[2]) * t + d[1]) * t + d[0];
        let dv = (3.0 * d[3] * t + 2.0 * d[2]) * t + d[1];
        (v, dv)
    };
    for _ in 0..POLISH_STEPS {
        let (v, dv) = eval(t);
        if v == 0.0 || dv == 0.0 || !dv.is_finite() {
            break;
        }
        let next = t - v / dv;
        if next.is_finite() && eval(next).0.abs() <= v.abs() {
            t = next;
        } else {
            break;
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    None,
    /// Supremum on the interval boundary (perfectly collinear complete pairs).
    Boundary,
    /// Clamped complete-pair covariance.
    CaseDeletion,
    Zero,
}

/// An interior stationary point and its objective value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub sigma12: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSelection {
    pub chosen: f64,
    /// Number of real roots of the polynomial, inside the interval or not.
    pub root_count: usize,
    pub candidates: Vec<Candidate>,
    pub fallback: Fallback,
}

/// Picks the interior root maximizing `eta`.
///
/// Roots whose objective values agree within [`ETA_TIE_RTOL`] are broken
/// toward `case_deletion`. Without an interior root the estimate falls back
/// to the boundary (collinear pairs), to `case_deletion` clamped inside the
/// interval, or to zero.
pub fn select_sigma12(problem: &CubicProblem, case_deletion: Option<f64>) -> RootSelection {
    let roots = cubic_roots(problem).unwrap_or_default();
    let root_count = roots.len();
    let candidates: Vec<Candidate> = roots
        .iter()
        .filter_map(|&s| {
            eta(problem, s)
                .ok()
                .filter(|v| v.is_finite())
                .map(|eta| Candidate { sigma12: s, eta })
        })
        .collect();

    let target = case_deletion.filter(|v| v.is_finite());
    let mut best: Option<Candidate> = None;
    for &c in &candidates {
        best = Some(match best {
            None => c,
            Some(b) => {
                let scale = b.eta.abs().max(c.eta.abs()).max(f64::MIN_POSITIVE);
                if (c.eta - b.eta).abs() <= ETA_TIE_RTOL * scale {
                    match target {
                        Some(t) if (c.sigma12 - t).abs() < (b.sigma12 - t).abs() => c,
                        _ => b,
                    }
                } else if c.eta > b.eta {
                    c
                } else {
                    b
                }
            }
        });
    }

    if let Some(b) = best {
        return RootSelection {
            chosen: b.sigma12,
            root_count,
            candidates,
            fallback: Fallback::None,
        };
    }

    let bound = problem.bound();
    let (chosen, fallback) = if let Some(edge) = boundary_supremum(problem) {
        (edge, Fallback::Boundary)
    } else if let Some(t) = target {
        let limit = FALLBACK_CLAMP * bound;
        (t.clamp(-limit, limit), Fallback::CaseDeletion)
    } else {
        (0.0, Fallback::Zero)
    };
    RootSelection {
        chosen,
        root_count,
        candidates,
        fallback,
    }
}

/// `Some(+-sqrt(sigma11 sigma22))` when the quadratic form vanishes at that end
/// of the interval, so `eta` grows without bound there.
fn boundary_supremum(problem: &CubicProblem) -> Option<f64> {
    if problem.a == 0 {
        return None;
    }
    let p = problem;
    let bound = p.bound();
    let scale = p.s22 * p.sigma11 + p.s11 * p.sigma22;
    if scale <= 0.0 {
        return None;
    }
    let at_plus = scale - 2.0 * bound * p.s12;
    let at_minus = scale + 2.0 * bound * p.s12;
    if at_plus.abs() <= BOUNDARY_RTOL * scale {
        Some(bound)
    } else if at_minus.abs() <= BOUNDARY_RTOL * scale {
        Some(-bound)
    } else {
        None
    }
}
