//! Dense Hermitian eigendecomposition on top of `faer`.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<Complex64>,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.nrows()).map(|r| self.vectors[(r, k)]).collect()
    }
}

/// Full eigendecomposition; takes the real symmetric path when every entry is real.
pub fn hermitian_eigen(m: &Mat<Complex64>) -> Result<HermitianEigen> {
    let n = m.nrows();
    let real = (0..n).all(|j| (0..n).all(|i| m[(i, j)].im == 0.0));
    if real {
        let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
        let values = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let vectors = Mat::<Complex64>::from_fn(n, n, |i, j| Complex64::new(u[(i, j)], 0.0));
        Ok(HermitianEigen { values, vectors })
    } else {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
        let values = (0..n).map(|k| evd.S()[k].re).collect();
        Ok(HermitianEigen {
            values,
            vectors: evd.U().to_owned(),
        })
    }
}

/// Eigenpairs of a real symmetric matrix; vectors as columns.
pub fn symmetric_eigen(n: usize, entries: impl Fn(usize, usize) -> f64) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = Mat::<f64>::from_fn(n, n, entries)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    Ok(((0..n).map(|k| evd.S()[k]).collect(), evd.U().to_owned()))
}
