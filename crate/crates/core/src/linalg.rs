//! Thin wrappers over nalgebra's symmetric eigensolver and SVD.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, sorted by ascending eigenvalue.
pub(crate) struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn symmetric_eigen_ascending(m: &DMatrix<f64>) -> Result<SortedEigen> {
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{n}x{n} eigenproblem has non-finite entries")));
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        let fro = m.norm();
        return Err(Error::Numerical(format!(
            "symmetric eigensolver diverged on {n}x{n} matrix (frobenius norm {fro:e})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SortedEigen { values, vectors })
}

/// `(U, singular values, Vᵀ)` of a general matrix.
pub(crate) fn svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) if svd.singular_values.iter().all(|s| s.is_finite()) => Ok((u, svd.singular_values, v_t)),
        _ => Err(Error::Numerical(format!(
            "SVD failed on {}x{} matrix",
            m.nrows(),
            m.ncols()
        ))),
    }
}

/// Frobenius-norm squared of `a - b`.
pub(crate) fn sq_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}
