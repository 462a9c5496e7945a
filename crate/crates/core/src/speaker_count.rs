//! Joint selection of the binarization factor and the speaker count by the
//! normalized maximum eigengap.
//!
//! For every `p` in the sweep the binarized affinity's unnormalized Laplacian
//! is diagonalized and the consecutive eigenvalue differences `e_p` are
//! formed. The ratio `g_p = max(e_p) / (λ_max + ε)` measures how pronounced
//! the best gap is; `r(p) = p / g_p` trades that against graph density. The
//! chosen `p̂` minimizes `r`, and the speaker count is the number of
//! eigenvalues below the largest gap of `e_p̂`.
//!
//! Gaps are searched only among the first `max_speakers` positions. Past
//! that, large gaps reflect graph degree structure (hubs, stars) rather than
//! cluster count.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::affinity::{laplacian, p_binarize};
use crate::error::{contract, Error, Result};
use crate::linalg::symmetric_eigen_ascending;

/// Eigenvalues smaller than this in magnitude are treated as exact zeros.
pub const ZERO_SNAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountConfig {
    pub p_min: usize,
    pub p_max: usize,
    pub epsilon: f64,
    pub max_speakers: usize,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self {
            p_min: 2,
            p_max: 20,
            epsilon: 1e-10,
            max_speakers: 10,
        }
    }
}

impl CountConfig {
    /// Clips the sweep to `p <= n - 1`. Returns `None` when no sweep is
    /// possible (`n < 2`).
    pub fn clipped_to(&self, n: usize) -> Option<Self> {
        if n < 2 {
            return None;
        }
        let p_max = self.p_max.min(n - 1).max(1);
        let p_min = self.p_min.clamp(1, p_max);
        Some(Self {
            p_min,
            p_max,
            ..self.clone()
        })
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(1 <= self.p_min && self.p_min <= self.p_max && self.p_max <= n) {
            return Err(contract!(
                "p range {}..={} invalid for {} segments",
                self.p_min,
                self.p_max,
                n
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_speakers == 0 {
            return Err(Error::Config("max_speakers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-p diagnostics of the sweep plus the selected `p̂` and `K̂`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigengapReport {
    pub p_values: Vec<usize>,
    pub eigenvalues_per_p: Vec<Vec<f64>>,
    pub e_p: Vec<Vec<f64>>,
    pub g_p: Vec<f64>,
    pub r_p: Vec<f64>,
    pub p_hat: usize,
    pub k_hat: usize,
}

/// Consecutive differences of ascending eigenvalues.
pub fn eigengap_vector(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = eigenvalues.windows(2).position(|w| w[1] < w[0]) {
        return Err(contract!("eigenvalues not ascending at position {}", w + 1));
    }
    Ok(eigenvalues.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Sorted, zero-snapped Laplacian spectrum of the p-binarized affinity.
pub fn laplacian_spectrum(raw: &DMatrix<f64>, p: usize) -> Result<Vec<f64>> {
    let (_, lap) = laplacian(&p_binarize(raw, p)?)?;
    let eig = symmetric_eigen_ascending(&lap)?;
    let mut values: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v.abs() < ZERO_SNAP { 0.0 } else { v })
        .collect();
    // Snapping can only break ordering within ±ZERO_SNAP.
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Index of the first maximum.
fn first_argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Sweeps `p` over `cfg.p_min..=cfg.p_max` and picks `p̂` and `K̂`.
pub fn estimate(raw: &DMatrix<f64>, cfg: &CountConfig) -> Result<EigengapReport> {
    let n = raw.nrows();
    if raw.ncols() != n {
        return Err(contract!("affinity must be square"));
    }
    if n < 2 {
        return Err(contract!("speaker counting needs at least 2 segments, got {n}"));
    }
    cfg.validate(n)?;
    let window = cfg.max_speakers.min(n - 1);

    let mut report = EigengapReport {
        p_values: Vec::new(),
        eigenvalues_per_p: Vec::new(),
        e_p: Vec::new(),
        g_p: Vec::new(),
        r_p: Vec::new(),
        p_hat: 0,
        k_hat: 0,
    };
    for p in cfg.p_min..=cfg.p_max {
        let eigenvalues = laplacian_spectrum(raw, p)?;
        let gaps = eigengap_vector(&eigenvalues)?;
        let lambda_max = eigenvalues[n - 1];
        let best_gap = gaps[..window].iter().copied().fold(0.0_f64, f64::max);
        let g = best_gap / (lambda_max + cfg.epsilon);
        let r = if g > 0.0 { p as f64 / g } else { f64::INFINITY };
        report.p_values.push(p);
        report.eigenvalues_per_p.push(eigenvalues);
        report.e_p.push(gaps);
        report.g_p.push(g);
        report.r_p.push(r);
    }

    if report.g_p.iter().all(|&g| g <= 0.0) {
        return Err(Error::IndeterminateCount(format!(
            "all eigengaps vanish for p in {}..={}",
            cfg.p_min, cfg.p_max
        )));
    }

    let mut best = 0;
    for (i, &r) in report.r_p.iter().enumerate() {
        if r < report.r_p[best] {
            best = i;
        }
    }
    report.p_hat = report.p_values[best];

    let gaps = &report.e_p[best];
    let k_windowed = first_argmax(&gaps[..window]).expect("window is non-empty") + 1;
    let k_global = first_argmax(gaps).expect("gaps are non-empty") + 1;
    if k_global > window {
        log::warn!(
            "largest eigengap at position {k_global} exceeds max_speakers={}; using {k_windowed}",
            cfg.max_speakers
        );
    }
    report.k_hat = k_windowed;
    Ok(report)
}
