use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ContinuousSolution;
use crate::error::{contract, Error, Result};
use crate::linalg::{sq_distance, svd};
use crate::segments::OverlapVector;

/// φ at or below this is an exact fit and ends the iteration.
pub const EXACT_FIT: f64 = 1e-12;

/// Binary N x K cluster assignment whose row `i` has `1 + v_OL[i]` ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    x: DMatrix<u8>,
    overlap: OverlapVector,
}

impl AssignmentMatrix {
    /// Builds from explicit 0/1 rows, checking entries and row sums.
    ///
    /// With a single column an overlapping row may carry one label only.
    pub fn from_rows(rows: &[Vec<u8>], overlap: OverlapVector) -> Result<Self> {
        let n = rows.len();
        if overlap.len() != n {
            return Err(contract!("{} rows but {} overlap flags", n, overlap.len()));
        }
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(contract!("assignment needs at least one column"));
        }
        let mut x = DMatrix::<u8>::zeros(n, k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(contract!("row {i} has {} columns, expected {k}", row.len()));
            }
            let mut ones = 0usize;
            for (j, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(contract!("entry ({i}, {j}) = {b} is not binary"));
                }
                ones += usize::from(b);
                x[(i, j)] = b;
            }
            let want = (1 + overlap.extra(i)).min(k);
            if ones != want {
                return Err(contract!("row {i} sums to {ones}, expected {want}"));
            }
        }
        Ok(Self { x, overlap })
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn get(&self, i: usize, k: usize) -> bool {
        self.x[(i, k)] == 1
    }

    /// Cluster indices set in row `i`, ascending.
    pub fn labels(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k()).filter(move |&k| self.get(i, k))
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.x.row(i).iter().map(|&b| usize::from(b)).sum()
    }

    pub fn overlap(&self) -> &OverlapVector {
        &self.overlap
    }

    pub fn matrix(&self) -> &DMatrix<u8> {
        &self.x
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.x.map(f64::from)
    }

    /// Number of columns with no member.
    pub fn empty_clusters(&self) -> usize {
        self.x.column_iter().filter(|c| c.iter().all(|&b| b == 0)).count()
    }
}

/// Orthonormal K x K matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub r: DMatrix<f64>,
}

impl Rotation {
    pub fn identity(k: usize) -> Self {
        Self {
            r: DMatrix::identity(k, k),
        }
    }

    /// `‖RᵀR - I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        let k = self.r.ncols();
        (self.r.transpose() * &self.r - DMatrix::<f64>::identity(k, k)).norm()
    }
}

/// `φ(X, R) = ‖X - X̃R‖²`.
pub fn phi(x: &AssignmentMatrix, x_tilde: &DMatrix<f64>, rotation: &Rotation) -> f64 {
    sq_distance(&x.to_f64(), &(x_tilde * &rotation.r))
}

/// Exact minimizer of `‖X - Y‖²` over binary X with row sums `1 + v_OL`:
/// keep the largest entry of each row, plus the second largest where the
/// overlap flag is set. Ties go to the lower column.
pub fn nms_assign(y: &DMatrix<f64>, overlap: &OverlapVector) -> Result<AssignmentMatrix> {
    let (n, k) = y.shape();
    if overlap.len() != n {
        return Err(contract!("{} rows but {} overlap flags", n, overlap.len()));
    }
    if k == 0 {
        return Err(contract!("assignment needs at least one column"));
    }
    let mut x = DMatrix::<u8>::zeros(n, k);
    let mut single_column_overlaps = 0usize;
    for i in 0..n {
        let mut first = 0;
        for j in 1..k {
            if y[(i, j)] > y[(i, first)] {
                first = j;
            }
        }
        x[(i, first)] = 1;
        if overlap.get(i) {
            if k == 1 {
                single_column_overlaps += 1;
                continue;
            }
            let mut second: Option<usize> = None;
            for j in (0..k).filter(|&j| j != first) {
                match second {
                    Some(s) if y[(i, j)] <= y[(i, s)] => {}
                    _ => second = Some(j),
                }
            }
            x[(i, second.expect("k >= 2"))] = 1;
        }
    }
    if single_column_overlaps > 0 {
        log::warn!("{single_column_overlaps} overlapping segments with a single cluster; emitting one label");
    }
    Ok(AssignmentMatrix {
        x,
        overlap: overlap.clone(),
    })
}

/// Orthogonal Procrustes: `R* = Ṽ Uᵀ` from the SVD `XᵀX̃* = U Ω Ṽᵀ`, the
/// orthonormal R minimizing `‖X - X̃*R‖²`.
pub fn procrustes(x: &AssignmentMatrix, x_tilde: &DMatrix<f64>) -> Result<Rotation> {
    if x.rows() != x_tilde.nrows() || x.k() != x_tilde.ncols() {
        return Err(contract!(
            "assignment {}x{} and embedding {}x{} disagree",
            x.rows(),
            x.k(),
            x_tilde.nrows(),
            x_tilde.ncols()
        ));
    }
    let m = x.to_f64().transpose() * x_tilde;
    let (u, sigma, v_t) = svd(&m)?;
    let scale = sigma.max().max(1.0);
    if sigma.min() <= 1e-10 * scale {
        log::debug!(
            "rank-deficient Procrustes cross-product (min singular value {:e})",
            sigma.min()
        );
    }
    Ok(Rotation {
        r: v_t.transpose() * u.transpose(),
    })
}

/// Seeded initial rotation: start at a random row of `X̃`, then repeatedly
/// add the row least aligned (smallest accumulated |inner product|) with
/// those already chosen. The chosen rows, orthonormalized, are the columns.
pub fn initial_rotation<R: Rng>(x_tilde: &DMatrix<f64>, rng: &mut R) -> Rotation {
    let (n, k) = x_tilde.shape();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    columns.push(x_tilde.row(first).transpose().into_owned());
    let mut accumulated = alloc::vec![0.0_f64; n];
    while columns.len() < k {
        let last = columns.last().expect("non-empty");
        let proj = x_tilde * last;
        let mut best = 0;
        for i in 0..n {
            accumulated[i] += proj[i].abs();
            if accumulated[i] < accumulated[best] {
                best = i;
            }
        }
        columns.push(x_tilde.row(best).transpose().into_owned());
    }
    Rotation {
        r: orthonormalize(&columns, k),
    }
}

/// Modified Gram-Schmidt; dependent columns are replaced by unit vectors.
fn orthonormalize(columns: &[DVector<f64>], k: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut fill = (0..k).map(|j| DVector::from_fn(k, |i, _| f64::from(u8::from(i == j))));
    for col in columns {
        let mut candidate = Some(col.clone());
        loop {
            let mut v = match candidate.take() {
                Some(v) => v,
                None => fill.next().expect("k unit vectors span R^k"),
            };
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                basis.push(v / norm);
                break;
            }
        }
    }
    let mut r = DMatrix::zeros(k, k);
    for (j, b) in basis.iter().enumerate() {
        r.set_column(j, b);
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscretizeConfig {
    pub max_iters: usize,
    /// Relative decrease of φ below which iteration stops.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for DiscretizeConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            restarts: 3,
            seed: 0,
        }
    }
}

/// Outcome of the alternating discretization.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub assignment: AssignmentMatrix,
    pub rotation: Rotation,
    pub phi: f64,
    /// `φ(X_t, R_t)` after each full round (X-step then R-step).
    pub phi_history: Vec<f64>,
    /// Which seeded restart produced the result.
    pub restart: usize,
}

/// Alternates NMS (R fixed) and Procrustes (X fixed) from `r0`.
pub fn discretize_from(
    x_tilde: &DMatrix<f64>,
    overlap: &OverlapVector,
    r0: Rotation,
    max_iters: usize,
    tol: f64,
) -> Result<Discretization> {
    if r0.r.nrows() != x_tilde.ncols() || r0.r.ncols() != x_tilde.ncols() {
        return Err(contract!("initial rotation has wrong shape"));
    }
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let mut rotation = r0;
    let mut history: Vec<f64> = Vec::new();
    let mut best: Option<(AssignmentMatrix, Rotation, f64)> = None;
    for _ in 0..max_iters {
        let x = nms_assign(&(x_tilde * &rotation.r), overlap)?;
        rotation = procrustes(&x, x_tilde)?;
        let value = phi(&x, x_tilde, &rotation);
        let previous = history.last().copied();
        history.push(value);
        if best.as_ref().is_none_or(|b| value < b.2) {
            best = Some((x, rotation.clone(), value));
        }
        match previous {
            _ if value <= EXACT_FIT => break,
            Some(prev) if (prev - value).abs() / prev.max(1e-12) < tol => break,
            _ => {}
        }
    }
    let (assignment, rotation, phi) = best.expect("at least one round");
    Ok(Discretization {
        assignment,
        rotation,
        phi,
        phi_history: history,
        restart: 0,
    })
}

/// Runs `cfg.restarts` seeded discretizations and keeps the smallest φ
/// (earliest restart on ties).
pub fn discretize(
    solution: &ContinuousSolution,
    overlap: &OverlapVector,
    cfg: &DiscretizeConfig,
) -> Result<Discretization> {
    let x_tilde = &solution.x_tilde;
    if overlap.len() != x_tilde.nrows() {
        return Err(contract!(
            "{} overlap flags for {} segments",
            overlap.len(),
            x_tilde.nrows()
        ));
    }
    if !(cfg.tol >= 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be non-negative, got {}",
            cfg.tol
        )));
    }
    let mut best: Option<Discretization> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
        let r0 = initial_rotation(x_tilde, &mut rng);
        let mut run = discretize_from(x_tilde, overlap, r0, cfg.max_iters, cfg.tol)?;
        run.restart = restart;
        if best.as_ref().is_none_or(|b| run.phi < b.phi) {
            best = Some(run);
        }
    }
    let result = best.expect("at least one restart");
    let empty = result.assignment.empty_clusters();
    if empty > 0 {
        log::info!("{empty} of {} clusters received no segments", result.assignment.k());
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn y(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn bits(a: &AssignmentMatrix) -> Vec<Vec<u8>> {
        a.matrix().row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    #[test]
    fn nms_single_and_two_peak() {
        let m = y(&[&[0.8, 0.5, 0.1]]);
        let single = nms_assign(&m, &OverlapVector::zeros(1)).unwrap();
        assert_eq!(bits(&single), vec![vec![1, 0, 0]]);
        let two = nms_assign(&m, &OverlapVector::from_flags(vec![true])).unwrap();
        assert_eq!(bits(&two), vec![vec![1, 1, 0]]);
    }

    #[test]
    fn nms_ties_prefer_lower_index() {
        let m = y(&[&[0.5, 0.5, 0.1], &[0.2, 0.3, 0.3]]);
        let out = nms_assign(&m, &OverlapVector::from_flags(vec![true, false])).unwrap();
        assert_eq!(bits(&out), vec![vec![1, 1, 0], vec![0, 1, 0]]);
    }

    #[test]
    fn nms_single_column_overlap_falls_back() {
        let out = nms_assign(&y(&[&[0.3]]), &OverlapVector::from_flags(vec![true])).unwrap();
        assert_eq!(out.row_sum(0), 1);
    }

    #[test]
    fn procrustes_of_self_is_identity() {
        let x = AssignmentMatrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 0]], OverlapVector::zeros(3)).unwrap();
        let r = procrustes(&x, &x.to_f64()).unwrap();
        assert!((r.r - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn fixed_point_converges_immediately() {
        let overlap = OverlapVector::from_flags(vec![false, true, false]);
        let x = AssignmentMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 1], vec![1, 0, 0]], overlap.clone()).unwrap();
        let run = discretize_from(&x.to_f64(), &overlap, Rotation::identity(3), 100, 1e-6).unwrap();
        assert_eq!(run.phi_history.len(), 1);
        assert!(run.phi < 1e-20);
        assert_eq!(run.assignment, x);
    }

    #[test]
    fn from_rows_checks_sums() {
        assert!(AssignmentMatrix::from_rows(&[vec![1, 1]], OverlapVector::zeros(1)).is_err());
        assert!(AssignmentMatrix::from_rows(&[vec![2, 0]], OverlapVector::zeros(1)).is_err());
        assert!(AssignmentMatrix::from_rows(&[vec![1]], OverlapVector::from_flags(vec![true])).is_ok());
    }

    #[test]
    fn initial_rotation_is_orthonormal_even_when_degenerate() {
        let x_tilde = DMatrix::from_fn(6, 3, |i, j| if j == i % 2 { 1.0 } else { 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = initial_rotation(&x_tilde, &mut rng);
        assert!(r.orthogonality_defect() < 1e-10);
    }
}
