//! Rayleigh–Bloch transverse wavenumbers and the truncated DtN boundary blocks.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Mesh, Side};

/// Distance (relative to `max(1, |k|², κ_n²)`) from the excluded ray that counts as a hit.
pub const BRANCH_CUT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DtnError {
    #[error("k = {k} puts k² − κ_{n}² on the branch cut (κ_n = {kappa_n})")]
    BranchCutHit { k: c64, n: i64, kappa_n: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtnSpec {
    pub kappa: f64,
    pub period: f64,
    pub order: usize,
}

impl DtnSpec {
    pub fn new(kappa: f64, period: f64, order: usize) -> Self {
        Self { kappa, period, order }
    }

    pub fn kappa_n(&self, n: i64) -> f64 {
        kappa_n(self.kappa, n, self.period)
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let t = self.order as i64;
        -t..=t
    }

    /// The branch points `±κ_n`, `|n| ≤ D_t`.
    pub fn branch_points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.modes().flat_map(|n| [self.kappa_n(n), -self.kappa_n(n)]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

pub fn kappa_n(kappa: f64, n: i64, period: f64) -> f64 {
    kappa + 2.0 * PI * n as f64 / period
}

/// Square root with `arg z ∈ (−π/2, 3π/2)`; the cut is the ray `{−it : t ≥ 0}`.
pub fn sqrt_branch(z: c64) -> c64 {
    // the principal root is right except in the open third quadrant, where the sheets differ by sign
    let w = z.sqrt();
    if z.re < 0.0 && z.im.is_sign_negative() {
        -w
    } else {
        w
    }
}

/// Distance from `z` to the excluded ray `{−it : t ≥ 0}`.
pub fn distance_to_cut(z: c64) -> f64 {
    if z.im <= 0.0 {
        z.re.abs()
    } else {
        z.norm()
    }
}

/// `ζ_n(k) = √(k² − κ_n²)` on the outgoing branch.
pub fn zeta_n(k: c64, kappa: f64, n: i64, period: f64) -> Result<c64, DtnError> {
    zeta(k, kappa_n(kappa, n, period)).map_err(|_| DtnError::BranchCutHit { k, n, kappa_n: kappa_n(kappa, n, period) })
}

/// `√(k² − κ_n²)` for a given `κ_n`.
pub fn zeta(k: c64, kappa_n: f64) -> Result<c64, DtnError> {
    let z = k * k - kappa_n * kappa_n;
    let scale = 1f64.max(k.norm_sqr()).max(kappa_n * kappa_n);
    if distance_to_cut(z) <= BRANCH_CUT_TOL * scale {
        return Err(DtnError::BranchCutHit { k, n: 0, kappa_n });
    }
    Ok(sqrt_branch(z))
}

/// Below this `|κ_n|·L` the element integrals switch to their Taylor series.
pub const SERIES_THRESHOLD: f64 = 0.5;

/// `(∫₀¹ (1−t) e^{−iθt} dt, ∫₀¹ t e^{−iθt} dt)`.
pub fn hat_moments(theta: f64) -> (c64, c64) {
    if theta.abs() < SERIES_THRESHOLD {
        // Σ (−iθ)^m/m! · (1/((m+1)(m+2)), 1/(m+2))
        let mut falling = c64::new(0.0, 0.0);
        let mut rising = c64::new(0.0, 0.0);
        let mut term = c64::new(1.0, 0.0);
        for m in 0..40 {
            let mf = m as f64;
            falling += term / ((mf + 1.0) * (mf + 2.0));
            rising += term / (mf + 2.0);
            term *= c64::new(0.0, -theta) / (mf + 1.0);
            if term.norm() < 1e-18 {
                break;
            }
        }
        (falling, rising)
    } else {
        let e = c64::new(0.0, -theta).exp();
        let whole = (c64::new(1.0, 0.0) - e) / c64::new(0.0, theta);
        let falling = c64::new(0.0, -1.0 / theta) + (c64::new(1.0, 0.0) - e) / (theta * theta);
        (falling, whole - falling)
    }
}

/// `(∫_a^b φ_a e^{−iκx} dx, ∫_a^b φ_b e^{−iκx} dx)` for the two hats of the element `[a, b]`.
pub fn element_integrals(a: f64, b: f64, kappa: f64) -> (c64, c64) {
    let len = b - a;
    let (f, r) = hat_moments(kappa * len);
    let phase = c64::new(0.0, -kappa * a).exp() * len;
    (phase * f, phase * r)
}

/// Fourier coefficients `f_n[j] = (1/d)∫ φ_j e^{−iκ_n x₁} dx₁` of the hat functions along
/// one horizontal boundary. Entry `j` refers to `mesh.side_nodes(side)[j]`.
pub fn boundary_fourier_vector(mesh: &Mesh, side: Side, kappa_n: f64) -> Vec<c64> {
    let nodes = mesh.side_nodes(side);
    let mut f = vec![c64::new(0.0, 0.0); nodes.len()];
    for j in 0..nodes.len().saturating_sub(1) {
        let (a, b) = (mesh.nodes[nodes[j]][0], mesh.nodes[nodes[j + 1]][0]);
        let (ia, ib) = element_integrals(a, b, kappa_n);
        f[j] += ia;
        f[j + 1] += ib;
    }
    let inv_d = 1.0 / mesh.period;
    for v in &mut f {
        *v *= inv_d;
    }
    f
}

/// Cached Fourier vectors of one boundary for every retained mode.
#[derive(Debug, Clone)]
pub struct DtnBoundary {
    pub side: Side,
    pub spec: DtnSpec,
    /// Mesh node index of each boundary DOF.
    pub nodes: Vec<usize>,
    /// Row `m` holds `f_n` for `n = m − D_t`.
    pub fourier: Mat<c64>,
}

impl DtnBoundary {
    pub fn new(mesh: &Mesh, side: Side, spec: DtnSpec) -> Self {
        let nodes = mesh.side_nodes(side).to_vec();
        let modes: Vec<i64> = spec.modes().collect();
        let mut fourier = Mat::<c64>::zeros(modes.len(), nodes.len());
        for (m, &n) in modes.iter().enumerate() {
            let f = boundary_fourier_vector(mesh, side, spec.kappa_n(n));
            for (j, v) in f.into_iter().enumerate() {
                fourier[(m, j)] = v;
            }
        }
        Self { side, spec, nodes, fourier }
    }

    pub fn num_modes(&self) -> usize {
        self.fourier.nrows()
    }

    /// Low-rank weights `i ζ_n(k) d`, in mode order.
    pub fn coefficients(&self, k: c64) -> Result<Vec<c64>, DtnError> {
        let d = self.spec.period;
        self.spec
            .modes()
            .map(|n| zeta_n(k, self.spec.kappa, n, d).map(|z| c64::new(0.0, d) * z))
            .collect()
    }

    /// Dense block `B[q, j] = Σ_n iζ_n d · conj(f_n[q]) f_n[j]` over the boundary DOFs.
    pub fn block(&self, k: c64) -> Result<Mat<c64>, DtnError> {
        let c = self.coefficients(k)?;
        let f = &self.fourier;
        let scaled = Mat::<c64>::from_fn(f.nrows(), f.ncols(), |m, j| c[m] * f[(m, j)]);
        Ok(f.adjoint() * &scaled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::two_triangle_square;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gauss_legendre_hat(a: f64, b: f64, kappa: f64, rising: bool) -> c64 {
        // composite 5-point Gauss–Legendre on 200 panels
        let x = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
        let w = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
        let panels = 200;
        let h = (b - a) / panels as f64;
        let mut s = c64::new(0.0, 0.0);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(w) {
                let t = mid + 0.5 * h * xi;
                let phi = if rising { (t - a) / (b - a) } else { (b - t) / (b - a) };
                s += c64::new(0.0, -kappa * t).exp() * (phi * wi * 0.5 * h);
            }
        }
        s
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta_n(c64::new(2.0, 0.0), 0.0, 0, 1.0).unwrap(), c64::new(2.0, 0.0));
        let z = zeta(c64::new(1.0, 0.0), 2.0).unwrap();
        assert_relative_eq!(z.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(z.im, 3f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(zeta(c64::new(2.0, 0.0), 2.0), Err(DtnError::BranchCutHit { .. })));
        assert!(matches!(zeta(c64::new(-2.0, 0.0), 2.0), Err(DtnError::BranchCutHit { .. })));
    }

    #[test]
    fn outgoing_coefficients_have_nonpositive_real_part() {
        let spec = DtnSpec::new(0.7, 1.3, 6);
        for &k in &[0.3, 1.1, 2.9, 7.0, 13.5] {
            for n in spec.modes() {
                let c = c64::new(0.0, 1.0) * zeta_n(c64::new(k, 0.0), spec.kappa, n, spec.period).unwrap();
                assert!(c.re <= 0.0, "n = {n}, k = {k}: {c}");
            }
        }
    }

    #[test]
    fn hat_integrals_match_quadrature() {
        for &(a, b, kappa) in &[(0.1, 0.35, 3.0), (0.0, 1.0, 20.0), (0.2, 0.2001, 1e-3), (0.4, 0.9, -7.5), (0.3, 0.5, 2.4999)] {
            let (fa, fb) = element_integrals(a, b, kappa);
            let qa = gauss_legendre_hat(a, b, kappa, false);
            let qb = gauss_legendre_hat(a, b, kappa, true);
            assert!((fa - qa).norm() < 1e-13 * (b - a), "{a} {b} {kappa}: {fa} vs {qa}");
            assert!((fb - qb).norm() < 1e-13 * (b - a), "{a} {b} {kappa}: {fb} vs {qb}");
        }
    }

    #[test]
    fn series_and_closed_form_agree_at_switch() {
        for theta in [SERIES_THRESHOLD * 0.999, -SERIES_THRESHOLD * 0.999] {
            let (fs, rs) = hat_moments(theta);
            let e = c64::new(0.0, -theta).exp();
            let fc = c64::new(0.0, -1.0 / theta) + (c64::new(1.0, 0.0) - e) / (theta * theta);
            let rc = (c64::new(1.0, 0.0) - e) / c64::new(0.0, theta) - fc;
            assert!((fs - fc).norm() < 1e-14);
            assert!((rs - rc).norm() < 1e-14);
        }
    }

    #[test]
    fn partition_of_unity() {
        let m = two_triangle_square().refine_uniform().refine_uniform();
        let f = boundary_fourier_vector(&m, Side::Top, 0.0);
        let s: c64 = f.iter().sum();
        assert!((s - 1.0).norm() < 1e-15);
    }

    #[test]
    fn conjugate_symmetry_in_kappa() {
        let m = two_triangle_square().refine_uniform();
        let f = boundary_fourier_vector(&m, Side::Bottom, 2.3);
        let g = boundary_fourier_vector(&m, Side::Bottom, -2.3);
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b.conj()).norm() < 1e-16);
        }
    }

    #[test]
    fn single_mode_block_is_rank_one() {
        let m = two_triangle_square().refine_uniform();
        let b = DtnBoundary::new(&m, Side::Top, DtnSpec::new(0.0, 1.0, 0));
        let k = c64::new(1.3, 0.0);
        let blk = b.block(k).unwrap();
        let f = &b.fourier;
        for q in 0..blk.nrows() {
            for j in 0..blk.ncols() {
                let want = c64::new(0.0, 1.3) * f[(0, q)].conj() * f[(0, j)];
                assert!((blk[(q, j)] - want).norm() < 1e-15);
            }
        }
        let s = blk.singular_values().unwrap();
        assert!(s[1] < 1e-14 * s[0]);
    }

    #[test]
    fn low_rank_identity() {
        let m = two_triangle_square().refine_uniform().refine_uniform();
        let spec = DtnSpec::new(0.4, 1.0, 5);
        let b = DtnBoundary::new(&m, Side::Top, spec);
        let k = c64::new(1.7, -0.2);
        let blk = b.block(k).unwrap();
        let mut max_err: f64 = 0.0;
        for q in 0..blk.nrows() {
            for j in 0..blk.ncols() {
                let mut s = c64::new(0.0, 0.0);
                for n in spec.modes() {
                    let f = boundary_fourier_vector(&m, Side::Top, spec.kappa_n(n));
                    s += c64::new(0.0, 1.0) * zeta_n(k, spec.kappa, n, 1.0).unwrap() * f[q].conj() * f[j];
                }
                max_err = max_err.max((blk[(q, j)] - s).norm());
            }
        }
        assert!(max_err < 1e-14, "{max_err}");
    }

    fn away_from_cut() -> impl Strategy<Value = (f64, f64, f64)> {
        (-20.0..20.0f64, -20.0..20.0f64, -30.0..30.0f64)
    }

    proptest! {
        #[test]
        fn zeta_squares_back((kr, ki, kn) in away_from_cut()) {
            let k = c64::new(kr, ki);
            let z2 = k * k - kn * kn;
            prop_assume!(distance_to_cut(z2) > 1e-8);
            let z = zeta(k, kn).unwrap();
            let err = (z * z - z2).norm() / z2.norm().max(1.0);
            prop_assert!(err < 1e-14);
            let arg = z2.arg();
            let arg = if arg < -PI / 2.0 { arg + 2.0 * PI } else { arg };
            let want = c64::from_polar(z2.norm().sqrt(), arg / 2.0);
            prop_assert!((z - want).norm() <= 1e-14 * want.norm().max(1.0));
        }

        #[test]
        fn zeta_continuous_on_small_circles(cr in 0.5..6.0f64, ci in 0.05..3.0f64, kn in 0.0..5.0f64) {
            // first-quadrant circles miss ±κ_n and the preimage of the cut (x² − y² = κ_n², xy ≤ 0)
            let c = c64::new(cr, ci);
            let rad = 0.25 * ci;
            let steps = 400;
            let mut prev = zeta(c + rad, kn).unwrap();
            for s in 1..=steps {
                let t = 2.0 * PI * s as f64 / steps as f64;
                let z = c + c64::from_polar(rad, t);
                let cur = zeta(z, kn).unwrap();
                prop_assert!((cur - prev).norm() < 0.1 * (1.0 + prev.norm()));
                prev = cur;
            }
        }
    }
}
