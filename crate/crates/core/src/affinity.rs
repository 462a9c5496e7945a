//! Cosine affinity, row-wise p-binarization and the unnormalized Laplacian.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};

/// Tolerance used when checking symmetry of a binarized affinity.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Cosine similarity between every pair of rows.
///
/// Rows need not be unit length; the diagonal is exactly 1 and entries are
/// clamped to `[-1, 1]`.
pub fn cosine_affinity(vectors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = vectors.nrows();
    let mut unit = vectors.clone();
    for (i, mut row) in unit.row_iter_mut().enumerate() {
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(contract!("embedding row {i} has zero or non-finite norm"));
        }
        row /= norm;
    }
    let mut a = &unit * unit.transpose();
    for i in 0..n {
        a[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = (0.5 * (a[(i, j)] + a[(j, i)])).clamp(-1.0, 1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// Row values within this distance of the `p`-th largest count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Keeps the `p` largest entries of every row as 1 and zeroes the rest, then
/// symmetrizes as `(A_p + A_pᵀ) / 2`, so entries are 0, 0.5 or 1.
///
/// The diagonal counts as one of the `p` entries and is always kept. When
/// several entries tie (within [`TIE_TOL`]) for the last kept places, those
/// places are shared evenly among them: every row still carries weight `p`,
/// and the result is the average over all ways of breaking the tie.
pub fn p_binarize(a: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    binarize(a, p, |_| true)
}

/// [`p_binarize`] where only columns with `neighbors[j]` set may be chosen
/// besides the diagonal. Rows are still formed for every segment.
pub fn p_binarize_restricted(a: &DMatrix<f64>, p: usize, neighbors: &[bool]) -> Result<DMatrix<f64>> {
    if neighbors.len() != a.nrows() {
        return Err(contract!(
            "neighbor mask of length {} for {} rows",
            neighbors.len(),
            a.nrows()
        ));
    }
    binarize(a, p, |j| neighbors[j])
}

fn binarize(a: &DMatrix<f64>, p: usize, allowed: impl Fn(usize) -> bool) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(contract!("affinity must be square, got {}x{}", n, a.ncols()));
    }
    if p == 0 || p > n {
        return Err(contract!("binarization factor p={p} outside 1..={n}"));
    }
    let mut kept = DMatrix::<f64>::zeros(n, n);
    let mut others: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        kept[(i, i)] = 1.0;
        if p == 1 {
            continue;
        }
        others.clear();
        others.extend((0..n).filter(|&j| j != i && allowed(j)).map(|j| a[(i, j)]));
        if others.len() < p - 1 {
            return Err(contract!(
                "row {i} has {} candidate neighbors, p={p} needs {}",
                others.len(),
                p - 1
            ));
        }
        others.sort_by(|x, y| y.total_cmp(x));
        let cut = others[p - 2];
        let above = others.iter().take_while(|&&v| v > cut + TIE_TOL).count();
        let tied = others[above..].iter().take_while(|&&v| v >= cut - TIE_TOL).count();
        let share = (p - 1 - above) as f64 / tied as f64;
        for j in (0..n).filter(|&j| j != i && allowed(j)) {
            let v = a[(i, j)];
            if v > cut + TIE_TOL {
                kept[(i, j)] = 1.0;
            } else if v >= cut - TIE_TOL {
                kept[(i, j)] = share;
            }
        }
    }
    Ok((&kept + kept.transpose()) * 0.5)
}

/// Degree vector and unnormalized Laplacian `L = diag(d) - Ā`.
pub fn laplacian(binarized: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = binarized.nrows();
    if binarized.ncols() != n {
        return Err(contract!("affinity must be square"));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (binarized[(i, j)] - binarized[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(contract!("affinity not symmetric at ({i}, {j})"));
            }
        }
    }
    if binarized.iter().any(|&v| v < 0.0) {
        return Err(contract!("affinity has negative entries"));
    }
    let degree = DVector::from_fn(n, |i, _| binarized.row(i).sum());
    let mut lap = -binarized.clone();
    for i in 0..n {
        lap[(i, i)] += degree[i];
    }
    Ok((degree, lap))
}

/// Affinity matrices for one binarization factor.
#[derive(Debug, Clone)]
pub struct AffinityBundle {
    /// Segments allowed as neighbors; `None` means all.
    pub neighbors: Option<Vec<bool>>,
    pub raw: DMatrix<f64>,
    pub p: usize,
    pub binarized: DMatrix<f64>,
    pub degree: DVector<f64>,
    pub laplacian: DMatrix<f64>,
}

impl AffinityBundle {
    pub fn build(raw: DMatrix<f64>, p: usize) -> Result<Self> {
        Self::build_restricted(raw, p, None)
    }

    pub fn build_restricted(raw: DMatrix<f64>, p: usize, neighbors: Option<Vec<bool>>) -> Result<Self> {
        let binarized = match &neighbors {
            Some(mask) => p_binarize_restricted(&raw, p, mask)?,
            None => p_binarize(&raw, p)?,
        };
        let (degree, laplacian) = laplacian(&binarized)?;
        Ok(Self {
            neighbors,
            raw,
            p,
            binarized,
            degree,
            laplacian,
        })
    }
}
