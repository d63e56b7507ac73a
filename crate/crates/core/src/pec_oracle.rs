//! Small-slit asymptotics of the eigenvalues of a perfectly conducting slab
//! of unit thickness with one rectangular slit per period.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtn::{kappa_n, zeta, DtnError};

/// The constant `α` of the expansion.
pub const ALPHA: f64 = -1.1070218960566;

/// Paired terms summed before giving up.
pub const MAX_TERMS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("γ series did not meet tolerance {tol:e} within {terms} terms")]
    SeriesDiverged { terms: usize, tol: f64 },
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub m: u32,
    pub kappa: f64,
    pub delta: f64,
    pub d: f64,
    #[serde(default = "default_series_tol")]
    pub series_tol: f64,
}

fn default_series_tol() -> f64 {
    1e-13
}

impl AsymptoticParams {
    pub fn new(m: u32, kappa: f64, delta: f64, d: f64) -> Self {
        Self { m, kappa, delta, d, series_tol: default_series_tol() }
    }
}

/// `1/(2π|n|) − (i/d)/ζ_n(k)` for `n ≠ 0`.
pub fn tail_term(k: f64, kappa: f64, d: f64, n: i64) -> Result<c64, DtnError> {
    let z = zeta(c64::new(k, 0.0), kappa_n(kappa, n, d))?;
    Ok(c64::new(1.0 / (2.0 * PI * n.unsigned_abs() as f64), 0.0) - c64::new(0.0, 1.0 / d) / z)
}

pub fn gamma(k: f64, kappa: f64, d: f64, series_tol: f64) -> Result<c64, OracleError> {
    gamma_limited(k, kappa, d, series_tol, MAX_TERMS)
}

fn gamma_limited(k: f64, kappa: f64, d: f64, series_tol: f64, max_terms: usize) -> Result<c64, OracleError> {
    if !(d > 0.0 && k.is_finite() && kappa.is_finite()) {
        return Err(OracleError::InvalidParams(format!("k = {k}, κ = {kappa}, d = {d}")));
    }
    let head = (3.0 * 2f64.ln() + (PI / d).ln()) / PI;
    let z0 = zeta(c64::new(k, 0.0), kappa_n(kappa, 0, d))?;
    let g0 = c64::new(head, 0.0) - c64::new(0.0, 1.0 / d) / z0;

    // ±n pairs cancel the 1/n parts; the paired terms decay like n⁻³
    let pair = |n: i64| -> Result<c64, OracleError> { Ok(tail_term(k, kappa, d, n)? + tail_term(k, kappa, d, -n)?) };
    let mut sum = c64::new(0.0, 0.0);
    let mut quiet = 0;
    let mut n = 0usize;
    while quiet < 2 {
        n += 1;
        if n > max_terms {
            return Err(OracleError::SeriesDiverged { terms: max_terms, tol: series_tol });
        }
        let t = pair(n as i64)?;
        sum += t;
        quiet = if t.norm() < series_tol { quiet + 1 } else { 0 };
    }
    // Richardson on S_N, S_2N with an N⁻² tail
    let s_n = sum;
    for m in n + 1..=2 * n {
        sum += pair(m as i64)?;
    }
    let extrapolated = (4.0 * sum - s_n) / 3.0;
    Ok(g0 + extrapolated)
}

/// `k_m ≈ mπ + 2mπ[(1/π)δ ln δ + (1/α + γ(mπ, κ, d))δ]`.
pub fn asymptotic_eigenvalue(p: &AsymptoticParams) -> Result<c64, OracleError> {
    if p.m == 0 || !(p.delta > 0.0 && p.delta < p.d) {
        return Err(OracleError::InvalidParams(format!("m = {}, δ = {}, d = {}", p.m, p.delta, p.d)));
    }
    let mp = p.m as f64 * PI;
    let g = gamma(mp, p.kappa, p.d, p.series_tol)?;
    let bracket = p.delta * p.delta.ln() / PI + (1.0 / ALPHA + g) * p.delta;
    Ok(mp + 2.0 * mp * bracket)
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: f64 = 0.4;

    fn k1(delta: f64) -> c64 {
        asymptotic_eigenvalue(&AsymptoticParams::new(1, PI / D, delta, D)).unwrap()
    }

    #[test]
    fn reproduces_published_values() {
        for (delta, want) in [(0.05, 2.8146), (0.02, 2.9741), (0.01, 3.0440)] {
            let k = k1(delta);
            assert!((k.re - want).abs() < 5e-4 && k.im.abs() < 1e-12, "δ = {delta}: {k}");
        }
    }

    #[test]
    fn increases_as_slit_narrows() {
        let ks: Vec<f64> = [0.05, 0.02, 0.01].iter().map(|&d| k1(d).re).collect();
        assert!(ks[0] < ks[1] && ks[1] < ks[2]);
    }

    #[test]
    fn closed_slit_limit() {
        let gap = (k1(1e-9) - PI).norm();
        assert!(gap < 1e-6, "{gap}");
        assert!((k1(1e-6) - PI).norm() > gap);
    }

    #[test]
    fn tail_decay_and_symmetry() {
        assert!(tail_term(PI, PI / D, D, 10_000).unwrap().norm() < 1e-7);
        let a = gamma(PI, PI / D, D, 1e-13).unwrap();
        let b = gamma(PI, -PI / D, D, 1e-13).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn tolerance_robustness() {
        let mut p = AsymptoticParams::new(1, PI / D, 0.05, D);
        p.series_tol = 1e-10;
        let a = asymptotic_eigenvalue(&p).unwrap();
        p.series_tol = 5e-11;
        let b = asymptotic_eigenvalue(&p).unwrap();
        assert!((a - b).norm() < 10.0 * 1e-10);
    }

    #[test]
    fn divergence_and_invalid_input() {
        assert!(matches!(gamma_limited(PI, PI / D, D, 0.0, 1000), Err(OracleError::SeriesDiverged { terms: 1000, .. })));
        assert!(matches!(
            asymptotic_eigenvalue(&AsymptoticParams::new(0, PI / D, 0.05, D)),
            Err(OracleError::InvalidParams(_))
        ));
        // k on a Rayleigh anomaly
        assert!(matches!(gamma(PI / D, PI / D, D, 1e-12), Err(OracleError::Dtn(_))));
    }
}
