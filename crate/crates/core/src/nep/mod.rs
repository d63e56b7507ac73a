//! Multi-step contour-integral eigensolver for holomorphic matrix functions.
//!
//! A cover of the search region is scanned with a spectral indicator,
//! candidates are extracted from occupied disks by Beyn's method, and each
//! candidate is validated through the smallest eigenvalue of `G(k)`, with
//! borderline ones re-examined on smaller disks.

mod audit;
mod beyn;
pub mod dense;
mod indicator;
mod region;
mod validate;

use std::f64::consts::PI;

use faer::{c64, Mat, MatMut, MatRef};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{AuditEvent, AuditLog, Decision};
pub use beyn::{beyn_extract, BeynOutput, Candidate};
pub use indicator::{contour_moments, contour_moments_scaled, gaussian_matrix, indicator, probe_vector};
pub use region::{hex_cover, solve_region, Region, RegionOutcome};
pub use validate::{validate, Validation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityKind {
    MaterialPole,
    MaterialZero,
    RayleighAnomaly,
}

impl std::fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SingularityKind::MaterialPole => "material_pole",
            SingularityKind::MaterialZero => "material_zero",
            SingularityKind::RayleighAnomaly => "rayleigh_anomaly",
        })
    }
}

/// A point (or branch cut) where the operator stops being holomorphic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub kind: SingularityKind,
    /// Pole/zero location, or the branch point `κ_n` whose cut is hit.
    pub at: c64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NepError {
    #[error("operator is not holomorphic at k = {k} ({reason})")]
    NotHolomorphicAt { k: c64, reason: SingularityKind },
    #[error("factorization is numerically singular at k = {k}")]
    SingularAt { k: c64 },
    #[error("all {l1} probe directions carry singular values above tolerance")]
    SubspaceTooSmall { l1: usize },
    #[error("inverse iteration did not converge in {steps} steps")]
    IterationStalled { steps: usize },
    #[error("search region touches {} singular point(s), first {:?}", .0.len(), .0.first())]
    RegionTouchesSingularity(Vec<Singularity>),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

/// Solves `G(k) X = Y` for a fixed `k`.
pub trait LinearSolve {
    fn solve_in_place(&self, rhs: MatMut<'_, c64>) -> Result<(), NepError>;
    /// Solves `G(k)ᴴ X = Y`.
    fn solve_adjoint_in_place(&self, rhs: MatMut<'_, c64>) -> Result<(), NepError>;
}

/// A holomorphic matrix-valued function `k ↦ G(k)` seen through the
/// evaluate/factorize/solve operations the solver needs.
pub trait NonlinearOperator {
    type Factor: LinearSolve;

    fn dim(&self) -> usize;

    /// Factorizes `G(z)`; fails when `z` is vetoed or the matrix is singular.
    fn factorize(&self, z: c64) -> Result<Self::Factor, NepError>;

    /// `G(z) X`.
    fn apply(&self, z: c64, x: MatRef<'_, c64>) -> Result<Mat<c64>, NepError>;

    /// Max column sum `‖G(z)‖₁`.
    fn norm_one(&self, z: c64) -> Result<f64, NepError>;

    /// Singular points or branch cuts meeting the closed disk.
    fn singularities_in_disk(&self, _center: c64, _radius: f64) -> Vec<Singularity> {
        Vec::new()
    }
}

/// Circular contour with its trapezoid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: c64,
    pub radius: f64,
    pub nodes: usize,
}

impl Disk {
    pub fn new(center: c64, radius: f64, nodes: usize) -> Result<Self, NepError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(NepError::InvalidConfig(format!("disk radius must be positive, got {radius}")));
        }
        if nodes < 8 {
            return Err(NepError::InvalidConfig(format!("at least 8 quadrature nodes required, got {nodes}")));
        }
        Ok(Self { center, radius, nodes })
    }

    /// `e^{iθ_j}` with `θ_j = 2πj/N_t`.
    pub fn unit_node(&self, j: usize) -> c64 {
        c64::from_polar(1.0, 2.0 * PI * j as f64 / self.nodes as f64)
    }

    /// Quadrature node `ψ(θ_j) = z₀ + r e^{iθ_j}`.
    pub fn node(&self, j: usize) -> c64 {
        self.center + self.unit_node(j) * self.radius
    }

    pub fn contains(&self, z: c64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `|λ⁰|`
    Absolute,
    /// `|λ⁰| / ‖G(k)‖₁`
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdTolMode {
    /// `σ_i > svd_tol`
    Absolute,
    /// `σ_i > svd_tol · max(σ_1, r · max_j ‖G(ψ_j)⁻¹V‖_F)`
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub indicator_threshold: f64,
    pub svd_tol: f64,
    pub svd_tol_mode: SvdTolMode,
    pub l1: usize,
    pub l1_max: usize,
    pub accept_tol: f64,
    pub reject_tol: f64,
    pub residual_mode: ResidualMode,
    pub refine_radius_factor: f64,
    pub rng_seed: u64,
    pub max_recursion_depth: usize,
    /// Trapezoid nodes `N_t` per disk.
    pub quadrature_nodes: usize,
    /// Inverse-iteration cap during validation.
    pub max_inverse_iterations: usize,
    /// Eigenvalues closer than `dedup_factor · r` are merged.
    pub dedup_factor: f64,
    /// Overlap of neighbouring disks in a hexagonal cover.
    pub cover_overlap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            indicator_threshold: 0.2,
            svd_tol: 1e-10,
            svd_tol_mode: SvdTolMode::Relative,
            l1: 24,
            l1_max: 192,
            accept_tol: 1e-12,
            reject_tol: 1e-5,
            residual_mode: ResidualMode::Absolute,
            refine_radius_factor: 0.1,
            rng_seed: 20_240_917,
            max_recursion_depth: 3,
            quadrature_nodes: 64,
            max_inverse_iterations: 200,
            dedup_factor: 1e-8,
            cover_overlap: 0.15,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), NepError> {
        let bad = |m: String| Err(NepError::InvalidConfig(m));
        if !(0.0 < self.accept_tol && self.accept_tol < self.reject_tol && self.reject_tol < 1.0) {
            return bad(format!(
                "need 0 < accept_tol < reject_tol < 1, got {} and {}",
                self.accept_tol, self.reject_tol
            ));
        }
        if !(self.indicator_threshold > 0.0 && self.indicator_threshold <= 1.0) {
            return bad(format!("indicator_threshold must lie in (0, 1], got {}", self.indicator_threshold));
        }
        if !(self.svd_tol > 0.0) {
            return bad("svd_tol must be positive".into());
        }
        if self.l1 == 0 || self.l1_max < self.l1 {
            return bad(format!("need 1 <= l1 <= l1_max, got {} and {}", self.l1, self.l1_max));
        }
        if !(self.refine_radius_factor > 0.0 && self.refine_radius_factor < 1.0) {
            return bad("refine_radius_factor must lie in (0, 1)".into());
        }
        if self.quadrature_nodes < 8 {
            return bad("quadrature_nodes must be at least 8".into());
        }
        if !(self.cover_overlap >= 0.0 && self.cover_overlap < 1.0) {
            return bad("cover_overlap must lie in [0, 1)".into());
        }
        if self.max_inverse_iterations == 0 {
            return bad("max_inverse_iterations must be positive".into());
        }
        Ok(())
    }
}

/// A validated eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub k: c64,
    /// Validation metric (`|λ⁰|`, or relative per config).
    pub residual: f64,
    #[serde(skip)]
    pub eigenvector: Vec<c64>,
    /// Disk the eigenvalue was accepted from.
    pub disk: Disk,
    pub disk_id: usize,
    pub config: SolverConfig,
}

/// `‖G(k)v‖₂ / ‖v‖₂`.
pub fn residual_norm<O: NonlinearOperator>(op: &O, k: c64, v: &[c64]) -> Result<f64, NepError> {
    let x = MatRef::from_column_major_slice(v, v.len(), 1);
    let y = op.apply(k, x)?;
    Ok(y.norm_l2() / x.norm_l2())
}

pub(crate) fn finite(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| m.col(j).iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}
