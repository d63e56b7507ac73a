use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::indicator::{contour_moments_scaled, gaussian_matrix};
use super::{Disk, NepError, NonlinearOperator, SvdTolMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub k: c64,
    /// Whether `k` lies strictly inside the disk it was extracted from.
    pub inside: bool,
    #[serde(skip)]
    pub vector: Vec<c64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeynOutput {
    pub candidates: Vec<Candidate>,
    /// Full singular-value spectrum of `C₀`.
    pub singular_values: Vec<f64>,
    /// Number of singular values above tolerance.
    pub rank: usize,
    pub l1: usize,
}

/// Beyn's extraction on one disk with an `L1`-wide random probe block.
///
/// When `L1` exceeds the operator dimension `m`, the probe block is `m` wide and
/// `⌈L1/m⌉` moment blocks are stacked into block Hankel matrices, which lets a
/// disk hold more eigenvalues than `m`. Returns [`NepError::SubspaceTooSmall`]
/// when, with a single moment block, every singular value of `C₀` exceeds the
/// tolerance and `L1 < m`.
pub fn beyn_extract<O: NonlinearOperator>(
    op: &O,
    disk: &Disk,
    l1: usize,
    svd_tol: f64,
    svd_tol_mode: SvdTolMode,
    seed: u64,
) -> Result<BeynOutput, NepError> {
    let dim = op.dim();
    let width = l1.min(dim).max(1);
    let blocks = l1.max(1).div_ceil(width);
    let v = gaussian_matrix(dim, width, seed);
    let (moments, integrand) = contour_moments_scaled(op, disk, v.as_ref(), 2 * blocks)?;
    let out = extract_from_moments(disk, &moments, integrand, blocks, svd_tol, svd_tol_mode)?;
    if blocks == 1 && out.rank == width && width < dim {
        return Err(NepError::SubspaceTooSmall { l1: width });
    }
    Ok(out)
}

fn hankel(moments: &[Mat<c64>], blocks: usize, shift: usize) -> Mat<c64> {
    let (n, l) = (moments[0].nrows(), moments[0].ncols());
    let mut h = Mat::<c64>::zeros(blocks * n, blocks * l);
    for bi in 0..blocks {
        for bj in 0..blocks {
            h.submatrix_mut(bi * n, bj * l, n, l).copy_from(&moments[bi + bj + shift]);
        }
    }
    h
}

pub(crate) fn extract_from_moments(
    disk: &Disk,
    moments: &[Mat<c64>],
    integrand: f64,
    blocks: usize,
    svd_tol: f64,
    svd_tol_mode: SvdTolMode,
) -> Result<BeynOutput, NepError> {
    let dim = moments[0].nrows();
    let (b0, b1) = if blocks == 1 {
        (moments[0].clone(), moments[1].clone())
    } else {
        (hankel(moments, blocks, 0), hankel(moments, blocks, 1))
    };
    let capacity = b0.ncols();
    let svd = b0.thin_svd().map_err(|e| NepError::Linalg(format!("SVD of C0 failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let cutoff = match svd_tol_mode {
        SvdTolMode::Absolute => svd_tol,
        // an empty disk leaves only cancellation noise in C₀, so σ₁ alone is no reference
        SvdTolMode::Relative => svd_tol * s.first().copied().unwrap_or(0.0).max(integrand),
    };
    let m = s.iter().filter(|&&x| x > cutoff && x > 0.0).count();
    let mut out = BeynOutput { candidates: Vec::new(), singular_values: s.clone(), rank: m, l1: capacity };
    if m == 0 {
        return Ok(out);
    }
    let v0 = svd.U().subcols(0, m);
    let w0 = svd.V().subcols(0, m);
    // D = V₀ᴴ C₁ W₀ Σ₀⁻¹
    let mut d = v0.adjoint() * &b1 * w0;
    for j in 0..m {
        let inv = 1.0 / s[j];
        for i in 0..m {
            d[(i, j)] *= inv;
        }
    }
    let evd = d.eigen().map_err(|e| NepError::Linalg(format!("eigendecomposition of D failed: {e:?}")))?;
    let mu = evd.S().column_vector();
    let vecs = v0.subrows(0, dim) * evd.U();
    for i in 0..m {
        let k = disk.center + mu[i] * disk.radius;
        let mut vector: Vec<c64> = vecs.col(i).iter().copied().collect();
        let norm = vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for z in &mut vector {
                *z /= norm;
            }
        }
        out.candidates.push(Candidate { k, inside: mu[i].norm() < 1.0, vector });
    }
    out.candidates.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
    Ok(out)
}

/// Repeats [`beyn_extract`] with `L1` doubled (up to `l1_max`) while the
/// probe subspace is saturated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn beyn_growing<O: NonlinearOperator>(
    op: &O,
    disk: &Disk,
    l1: usize,
    l1_max: usize,
    svd_tol: f64,
    svd_tol_mode: SvdTolMode,
    seed: u64,
    mut on_grow: impl FnMut(usize),
) -> Result<BeynOutput, NepError> {
    let mut l1 = l1.min(l1_max).max(1);
    loop {
        let saturated = match beyn_extract(op, disk, l1, svd_tol, svd_tol_mode, seed) {
            Err(NepError::SubspaceTooSmall { .. }) => true,
            Ok(out) if out.rank == out.l1 => {
                if l1 >= l1_max {
                    return Ok(out);
                }
                true
            }
            other => return other,
        };
        if saturated && l1 >= l1_max {
            return Err(NepError::SubspaceTooSmall { l1 });
        }
        l1 = (2 * l1).min(l1_max);
        on_grow(l1);
    }
}
