use faer::{c64, Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Disk, LinearSolve, NepError, NonlinearOperator};

/// Seeded complex Gaussian matrix, generated column by column so that a wider
/// matrix from the same seed extends a narrower one.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Mat<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mat::<c64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c64::new(re, im);
        }
    }
    m
}

/// Unit-norm complex Gaussian probe.
pub fn probe_vector(dim: usize, seed: u64) -> Mat<c64> {
    let mut p = gaussian_matrix(dim, 1, seed);
    let n = p.norm_l2();
    p *= faer::Scale(c64::new(1.0 / n, 0.0));
    p
}

/// Trapezoid moments `A_p = (1/N)Σ r e^{iθ_j} e^{ipθ_j} G(ψ_j)⁻¹V`, `p < count`.
///
/// `A_p` approximates `(1/2πi)∮ ((z − z₀)/r)^p G(z)⁻¹V dz`, so eigenvalues of
/// the reduced pencil come out in the disk's local coordinate `(z − z₀)/r`.
pub fn contour_moments<O: NonlinearOperator>(
    op: &O,
    disk: &Disk,
    v: MatRef<'_, c64>,
    count: usize,
) -> Result<Vec<Mat<c64>>, NepError> {
    Ok(contour_moments_scaled(op, disk, v, count)?.0)
}

/// [`contour_moments`] together with `r · max_j ‖G(ψ_j)⁻¹V‖_F`, the size of the integrand.
pub fn contour_moments_scaled<O: NonlinearOperator>(
    op: &O,
    disk: &Disk,
    v: MatRef<'_, c64>,
    count: usize,
) -> Result<(Vec<Mat<c64>>, f64), NepError> {
    let (n, l) = (v.nrows(), v.ncols());
    let mut integrand: f64 = 0.0;
    let mut moments = vec![Mat::<c64>::zeros(n, l); count];
    let mut x = Mat::<c64>::zeros(n, l);
    let scale = disk.radius / disk.nodes as f64;
    for j in 0..disk.nodes {
        let w = disk.unit_node(j);
        let factor = op.factorize(disk.node(j))?;
        x.copy_from(v);
        factor.solve_in_place(x.as_mut())?;
        integrand = integrand.max(disk.radius * x.norm_l2());
        let mut a = w * scale;
        for m in &mut moments {
            for col in 0..l {
                let xs = x.col(col);
                let mut mc = m.col_mut(col);
                for (i, xv) in xs.iter().enumerate() {
                    mc[i] += a * xv;
                }
            }
            a *= w;
        }
    }
    Ok((moments, integrand))
}

/// Spectral indicator `‖(1/2πi)∮ G(z)⁻¹ p dz‖₂` with `p` scaled to unit norm.
pub fn indicator<O: NonlinearOperator>(op: &O, disk: &Disk, probe: MatRef<'_, c64>) -> Result<f64, NepError> {
    let norm = probe.norm_l2();
    if !(norm > 0.0) {
        return Err(NepError::InvalidConfig("probe vector must be nonzero".into()));
    }
    let mut p = probe.to_owned();
    p *= faer::Scale(c64::new(1.0 / norm, 0.0));
    let moments = contour_moments(op, disk, p.as_ref(), 1)?;
    Ok(moments[0].norm_l2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nep::dense::diagonal_example;

    #[test]
    fn empty_disk_is_quiet() {
        let op = diagonal_example();
        let p = probe_vector(2, 7);
        let v = indicator(&op, &Disk::new(c64::new(5.0, 0.0), 0.5, 32).unwrap(), p.as_ref()).unwrap();
        assert!(v < 1e-10, "{v}");
    }

    #[test]
    fn residue_magnitude() {
        let op = diagonal_example();
        let p = Mat::from_fn(2, 1, |_, _| c64::new(1.0, 0.0));
        let v = indicator(&op, &Disk::new(c64::new(1.0, 0.0), 0.5, 32).unwrap(), p.as_ref()).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn gaussian_columns_extend() {
        let a = gaussian_matrix(5, 2, 3);
        let b = gaussian_matrix(5, 4, 3);
        assert_eq!(a.as_ref(), b.subcols(0, 2));
    }
}
