//! Small dense operators given by a closure; used for the synthetic test suite.

use faer::linalg::solvers::{PartialPivLu, SolveCore};
use faer::{c64, Conj, Mat, MatMut, MatRef};

use super::{finite, LinearSolve, NepError, NonlinearOperator};

/// Pivots below `SINGULAR_PIVOT · max|U_ii|` flag the matrix as singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

pub struct DenseOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(c64) -> Mat<c64>> DenseOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }

    pub fn evaluate(&self, z: c64) -> Mat<c64> {
        let g = (self.f)(z);
        assert_eq!((g.nrows(), g.ncols()), (self.dim, self.dim), "operator returned a matrix of the wrong size");
        g
    }
}

/// `diag(z − 1, z − 2)`.
pub fn diagonal_example() -> DenseOperator<impl Fn(c64) -> Mat<c64>> {
    DenseOperator::new(2, |z: c64| {
        Mat::from_fn(2, 2, |i, j| if i == j { z - (i as f64 + 1.0) } else { c64::new(0.0, 0.0) })
    })
}

/// `z²I₂ + [[0, 1], [1, 0]]`, eigenvalues `±1, ±i`.
pub fn quadratic_example() -> DenseOperator<impl Fn(c64) -> Mat<c64>> {
    DenseOperator::new(2, |z: c64| Mat::from_fn(2, 2, |i, j| if i == j { z * z } else { c64::new(1.0, 0.0) }))
}

pub struct DenseFactor {
    lu: PartialPivLu<c64>,
    z: c64,
}

impl LinearSolve for DenseFactor {
    fn solve_in_place(&self, mut rhs: MatMut<'_, c64>) -> Result<(), NepError> {
        self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        if finite(rhs.as_ref()) {
            Ok(())
        } else {
            Err(NepError::SingularAt { k: self.z })
        }
    }

    fn solve_adjoint_in_place(&self, mut rhs: MatMut<'_, c64>) -> Result<(), NepError> {
        self.lu.solve_transpose_in_place_with_conj(Conj::Yes, rhs.as_mut());
        if finite(rhs.as_ref()) {
            Ok(())
        } else {
            Err(NepError::SingularAt { k: self.z })
        }
    }
}

impl<F: Fn(c64) -> Mat<c64>> NonlinearOperator for DenseOperator<F> {
    type Factor = DenseFactor;

    fn dim(&self) -> usize {
        self.dim
    }

    fn factorize(&self, z: c64) -> Result<DenseFactor, NepError> {
        let lu = self.evaluate(z).partial_piv_lu();
        let u = lu.U();
        let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        if max == 0.0 || diag.iter().any(|&p| p <= SINGULAR_PIVOT * max) {
            return Err(NepError::SingularAt { k: z });
        }
        Ok(DenseFactor { lu, z })
    }

    fn apply(&self, z: c64, x: MatRef<'_, c64>) -> Result<Mat<c64>, NepError> {
        Ok(self.evaluate(z) * x)
    }

    fn norm_one(&self, z: c64) -> Result<f64, NepError> {
        let g = self.evaluate(z);
        Ok((0..g.ncols()).map(|j| g.col(j).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max))
    }
}
