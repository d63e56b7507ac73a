//! Frequency-dependent relative permittivity models.
//!
//! All wavenumbers here are scaled: a physical angular frequency `ω` maps to
//! `k̂ = ω / (c·α)` where `α` is the geometric scale factor of the problem.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default radius around a permittivity pole inside which evaluation is refused.
pub const DEFAULT_POLE_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("permittivity evaluated within {radius:e} of its pole at {pole}")]
    EvaluationAtSingularity { pole: Complex64, radius: f64 },
    #[error("perfect conductors have no permittivity; they are excluded from the domain")]
    PecNotEvaluable,
    #[error("invalid material parameter: {0}")]
    InvalidParameter(String),
}

/// Relative permittivity model of the metal (or of vacuum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum PermittivityModel {
    Vacuum,
    Pec,
    /// `ε(k) = 1 − ω̂_p²/k²`
    DrudeLossless { omega_p_hat: f64 },
    /// `ε(k) = 1 − ω̂_p²/(k² + iΓ̂k)`
    DrudeSommerfeld { omega_p_hat: f64, gamma_hat: f64 },
}

/// Geometric scaling between physical and computational units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// Dimensionless geometric scale factor.
    pub alpha: f64,
    /// Wave speed in length/time.
    pub c: f64,
}

impl Scaling {
    pub const SPEED_OF_LIGHT: f64 = 3.0e8;

    pub fn new(alpha: f64, c: f64) -> Result<Self, MaterialError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MaterialError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(MaterialError::InvalidParameter(format!("c must be positive, got {c}")));
        }
        Ok(Self { alpha, c })
    }

    /// Physical angular frequency `ω = c·α·k̂` for a scaled wavenumber.
    pub fn angular_frequency(&self, k_hat: f64) -> f64 {
        self.c * self.alpha * k_hat
    }

    /// Same as [`Scaling::angular_frequency`], expressed in units of 10¹² /s.
    pub fn terahertz(&self, k_hat: f64) -> f64 {
        self.angular_frequency(k_hat) * 1e-12
    }
}

/// Scales a physical plasma frequency and damping (both 1/time) to the
/// computational wavenumber units `ω/(c·α)`.
pub fn scale_drude(omega_p: f64, gamma: f64, scaling: Scaling) -> Result<(f64, f64), MaterialError> {
    if !(omega_p > 0.0 && omega_p.is_finite()) {
        return Err(MaterialError::InvalidParameter(format!("omega_p must be positive, got {omega_p}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(MaterialError::InvalidParameter(format!("gamma must be non-negative, got {gamma}")));
    }
    let s = scaling.c * scaling.alpha;
    Ok((omega_p / s, gamma / s))
}

impl PermittivityModel {
    pub fn validate(&self) -> Result<(), MaterialError> {
        match *self {
            PermittivityModel::Vacuum | PermittivityModel::Pec => Ok(()),
            PermittivityModel::DrudeLossless { omega_p_hat } => check_plasma(omega_p_hat),
            PermittivityModel::DrudeSommerfeld { omega_p_hat, gamma_hat } => {
                check_plasma(omega_p_hat)?;
                if !(gamma_hat >= 0.0 && gamma_hat.is_finite()) {
                    return Err(MaterialError::InvalidParameter(format!(
                        "gamma_hat must be non-negative, got {gamma_hat}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_pec(&self) -> bool {
        matches!(self, PermittivityModel::Pec)
    }

    /// Poles of `ε(k)`.
    pub fn poles(&self) -> Vec<Complex64> {
        match *self {
            PermittivityModel::Vacuum | PermittivityModel::Pec => Vec::new(),
            PermittivityModel::DrudeLossless { .. } => vec![Complex64::new(0.0, 0.0)],
            PermittivityModel::DrudeSommerfeld { gamma_hat, .. } => {
                if gamma_hat == 0.0 {
                    vec![Complex64::new(0.0, 0.0)]
                } else {
                    vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, -gamma_hat)]
                }
            }
        }
    }

    /// Zeros of `ε(k)`, where `1/ε` in the stiffness term blows up.
    pub fn zeros(&self) -> Vec<Complex64> {
        match *self {
            PermittivityModel::Vacuum | PermittivityModel::Pec => Vec::new(),
            PermittivityModel::DrudeLossless { omega_p_hat } => {
                vec![Complex64::new(-omega_p_hat, 0.0), Complex64::new(omega_p_hat, 0.0)]
            }
            PermittivityModel::DrudeSommerfeld { omega_p_hat, gamma_hat } => {
                // k² + iΓ̂k − ω̂_p² = 0
                let disc = Complex64::new(4.0 * omega_p_hat * omega_p_hat - gamma_hat * gamma_hat, 0.0).sqrt();
                let shift = Complex64::new(0.0, -gamma_hat);
                vec![(shift - disc) * 0.5, (shift + disc) * 0.5]
            }
        }
    }

    /// Evaluates `ε(k)` with the default pole exclusion radius.
    pub fn evaluate(&self, k: Complex64) -> Result<Complex64, MaterialError> {
        self.evaluate_with_exclusion(k, DEFAULT_POLE_EXCLUSION)
    }

    pub fn evaluate_with_exclusion(&self, k: Complex64, exclusion: f64) -> Result<Complex64, MaterialError> {
        if self.is_pec() {
            return Err(MaterialError::PecNotEvaluable);
        }
        if let Some(&pole) = self.poles().iter().find(|p| (k - **p).norm() < exclusion) {
            return Err(MaterialError::EvaluationAtSingularity { pole, radius: exclusion });
        }
        let one = Complex64::new(1.0, 0.0);
        Ok(match *self {
            PermittivityModel::Vacuum => one,
            PermittivityModel::Pec => unreachable!(),
            PermittivityModel::DrudeLossless { omega_p_hat } => one - omega_p_hat * omega_p_hat / (k * k),
            PermittivityModel::DrudeSommerfeld { omega_p_hat, gamma_hat } => {
                one - omega_p_hat * omega_p_hat / (k * (k + Complex64::new(0.0, gamma_hat)))
            }
        })
    }
}

fn check_plasma(omega_p_hat: f64) -> Result<(), MaterialError> {
    if omega_p_hat > 0.0 && omega_p_hat.is_finite() {
        Ok(())
    } else {
        Err(MaterialError::InvalidParameter(format!("omega_p_hat must be positive, got {omega_p_hat}")))
    }
}
