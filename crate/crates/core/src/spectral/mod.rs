//! Multi-class normalized-cuts clustering.
//!
//! The relaxed problem `max tr(ZᵀĀZ) s.t. ZᵀDZ = I` is solved by the top
//! eigenvectors of `P = D⁻¹Ā`. Its row-normalized form `X̃*` is then
//! discretized by alternating a constrained non-maximal suppression step with
//! an orthogonal Procrustes step (see [`discretize`]).

mod discretize;

pub use discretize::{
    discretize, discretize_from, initial_rotation, nms_assign, phi, procrustes, AssignmentMatrix, Discretization,
    DiscretizeConfig, Rotation, EXACT_FIT,
};

use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Error, Result};
use crate::linalg::symmetric_eigen_ascending;

/// Added to every degree when some node is isolated.
pub const DEGREE_FLOOR: f64 = 1e-10;

/// Continuous optimum of the relaxed normalized-cuts problem.
#[derive(Debug, Clone)]
pub struct ContinuousSolution {
    /// N x K eigenvectors of `P`, scaled so that `ZᵀDZ = I`.
    pub z: DMatrix<f64>,
    /// The K largest eigenvalues of `P`, descending.
    pub eigenvalues: DVector<f64>,
    /// Row-normalized `z`.
    pub x_tilde: DMatrix<f64>,
    /// Degrees actually used (after flooring, if any).
    pub degree: DVector<f64>,
}

impl ContinuousSolution {
    pub fn k(&self) -> usize {
        self.z.ncols()
    }
}

/// Top-`k` eigenvectors of `D⁻¹Ā` via the symmetric matrix `D^-1/2 Ā D^-1/2`.
pub fn continuous_solve(binarized: &DMatrix<f64>, degree: &DVector<f64>, k: usize) -> Result<ContinuousSolution> {
    let n = binarized.nrows();
    if binarized.ncols() != n || degree.len() != n {
        return Err(contract!(
            "affinity {}x{} and degree of length {} disagree",
            n,
            binarized.ncols(),
            degree.len()
        ));
    }
    if k == 0 || k > n {
        return Err(contract!("cluster count {k} outside 1..={n}"));
    }
    let mut degree = degree.clone();
    if degree.iter().any(|&d| d <= 0.0) {
        log::warn!("isolated nodes in affinity graph; flooring degrees by {DEGREE_FLOOR:e}");
        degree.add_scalar_mut(DEGREE_FLOOR);
    }
    let inv_sqrt = degree.map(|d| 1.0 / libm::sqrt(d));
    let mut sym = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * binarized[(i, j)] * inv_sqrt[j]);
    sym = (&sym + sym.transpose()) * 0.5;

    let eig = symmetric_eigen_ascending(&sym).map_err(|e| match e {
        Error::Numerical(m) => {
            let (lo, hi) = degree
                .iter()
                .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            Error::Numerical(format!("{m}; degree range {lo:e}..{hi:e}"))
        }
        other => other,
    })?;
    let z = DMatrix::from_fn(n, k, |i, c| inv_sqrt[i] * eig.vectors[(i, n - 1 - c)]);
    let eigenvalues = DVector::from_fn(k, |c, _| eig.values[n - 1 - c]);
    let x_tilde = f_inverse(&z);
    Ok(ContinuousSolution {
        z,
        eigenvalues,
        x_tilde,
        degree,
    })
}

/// `tr(ZᵀĀZ)`.
pub fn objective_continuous(z: &DMatrix<f64>, affinity: &DMatrix<f64>) -> Result<f64> {
    if z.nrows() != affinity.nrows() || affinity.nrows() != affinity.ncols() {
        return Err(contract!("shape mismatch in trace objective"));
    }
    Ok((z.transpose() * affinity * z).trace())
}

/// Average link ratio `(1/K) Σ_k X_kᵀĀX_k / X_kᵀDX_k`. Empty clusters add 0.
pub fn link_ratio(x: &DMatrix<f64>, affinity: &DMatrix<f64>, degree: &DVector<f64>) -> Result<f64> {
    if x.nrows() != affinity.nrows() || degree.len() != x.nrows() {
        return Err(contract!("shape mismatch in link ratio"));
    }
    let k = x.ncols();
    let mut total = 0.0;
    for col in x.column_iter() {
        let within = (col.transpose() * affinity * col)[(0, 0)];
        let volume: f64 = col.iter().zip(degree.iter()).map(|(x, d)| x * x * d).sum();
        if volume > 0.0 {
            total += within / volume;
        }
    }
    Ok(total / k as f64)
}

/// `f(X) = X (XᵀDX)^-1/2`.
pub fn f_map(x: &DMatrix<f64>, degree: &DVector<f64>) -> Result<DMatrix<f64>> {
    if degree.len() != x.nrows() {
        return Err(contract!("degree length {} for {} rows", degree.len(), x.nrows()));
    }
    let gram = x.transpose() * DMatrix::from_diagonal(degree) * x;
    let eig = symmetric_eigen_ascending(&((&gram + gram.transpose()) * 0.5))?;
    if eig.values.iter().any(|&v| v <= 0.0) {
        return Err(contract!("XᵀDX is singular (an empty cluster?)"));
    }
    let inv_sqrt_vals = eig.values.map(|v| 1.0 / libm::sqrt(v));
    let inv_sqrt = &eig.vectors * DMatrix::from_diagonal(&inv_sqrt_vals) * eig.vectors.transpose();
    Ok(x * inv_sqrt)
}

/// `f⁻¹(Z) = Diag(diag(ZZᵀ))^-1/2 Z`: scale every row to unit length.
///
/// All-zero rows carry no direction and become the uniform row `1/√K`.
pub fn f_inverse(z: &DMatrix<f64>) -> DMatrix<f64> {
    let k = z.ncols();
    let mut out = z.clone();
    let mut zero_rows = 0usize;
    for mut row in out.row_iter_mut() {
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        if norm > 0.0 {
            row /= norm;
        } else {
            zero_rows += 1;
            row.fill(1.0 / libm::sqrt(k as f64));
        }
    }
    if zero_rows > 0 {
        log::warn!("{zero_rows} zero rows in spectral embedding replaced by the uniform row");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn blocks(sizes: &[usize]) -> DMatrix<f64> {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| core::iter::repeat_n(b, s))
            .collect();
        let n = labels.len();
        DMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 })
    }

    fn degree_of(a: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(a.nrows(), |i, _| a.row(i).sum())
    }

    #[test]
    fn identity_affinity_meets_constraint() {
        let a = DMatrix::identity(4, 4);
        let sol = continuous_solve(&a, &degree_of(&a), 4).unwrap();
        let gram = sol.z.transpose() * DMatrix::from_diagonal(&sol.degree) * &sol.z;
        assert!((gram - DMatrix::identity(4, 4)).norm() < 1e-6);
    }

    #[test]
    fn disconnected_blocks_give_piecewise_constant_rows() {
        let a = blocks(&[3, 4]);
        let sol = continuous_solve(&a, &degree_of(&a), 2).unwrap();
        let x = &sol.x_tilde;
        let dot = |i: usize, j: usize| x.row(i).dot(&x.row(j));
        for (i, j) in [(0, 1), (0, 2), (3, 6), (4, 5)] {
            assert!((dot(i, j) - 1.0).abs() < 1e-8, "rows {i},{j}");
        }
        assert!(dot(0, 3).abs() < 1e-8);
        for row in x.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let a = DMatrix::identity(3, 3);
        assert!(continuous_solve(&a, &degree_of(&a), 0).is_err());
        assert!(continuous_solve(&a, &degree_of(&a), 4).is_err());
    }

    #[test]
    fn trace_objective_closed_forms() {
        let a = DMatrix::identity(5, 5);
        assert_eq!(objective_continuous(&DMatrix::zeros(5, 2), &a).unwrap(), 0.0);
        let z = DMatrix::from_fn(5, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!((objective_continuous(&z, &a).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn f_inverse_undoes_f_on_partitions() {
        let a = blocks(&[2, 3]);
        let d = degree_of(&a);
        let x = DMatrix::from_row_slice(5, 2, &[1., 0., 0., 1., 1., 0., 0., 1., 0., 1.]);
        let back = f_inverse(&f_map(&x, &d).unwrap());
        assert!((back - x).norm() < 1e-12);
    }
}
