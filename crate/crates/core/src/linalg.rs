//! Thin bridge between `ndarray` storage and `faer` factorizations.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};

use crate::{Error, Result};

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
pub(crate) struct SymEigen {
    pub values: Array1<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Array2<f64>,
}

pub(crate) fn sym_eigen(a: ArrayView2<f64>) -> Result<SymEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NonFinite(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    // faer returns ascending order
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for k in 0..n {
        let src = n - 1 - k;
        values[k] = s[src];
        for i in 0..n {
            vectors[[i, k]] = u[(i, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Solve `a x = b` for symmetric positive definite `a`. Returns `None` when
/// the Cholesky factorization fails.
pub(crate) fn spd_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[[i, j]]);
    let llt = m.llt(Side::Lower).ok()?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = llt.solve(&rhs);
    let out = Array1::from_shape_fn(n, |i| x[(i, 0)]);
    out.iter().all(|v| v.is_finite()).then_some(out)
}
