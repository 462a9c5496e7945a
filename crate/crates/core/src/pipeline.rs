//! End-to-end clustering of one recording.

use alloc::vec;
use alloc::vec::Vec;

use crate::affinity::{cosine_affinity, AffinityBundle};
use crate::error::{contract, Result};
use crate::segments::{EmbeddingSequence, OverlapVector};
use crate::speaker_count::{estimate, CountConfig, EigengapReport};
use crate::spectral::{continuous_solve, discretize, AssignmentMatrix, DiscretizeConfig};
use crate::timeline::{assignment_to_timeline, cluster_name, Timeline};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiarizeConfig {
    pub count: CountConfig,
    pub discretize: DiscretizeConfig,
    /// When overlaps are flagged, count speakers on the unflagged segments
    /// only and never pick a flagged segment as a graph neighbor.
    pub clean_neighbors: bool,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        Self {
            count: CountConfig::default(),
            discretize: DiscretizeConfig::default(),
            clean_neighbors: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diarization {
    pub timeline: Timeline,
    pub assignment: AssignmentMatrix,
    /// `None` for single-segment recordings, where no sweep is possible.
    pub report: Option<EigengapReport>,
    /// The graph that was clustered; `None` for single-segment recordings.
    pub affinity: Option<AffinityBundle>,
    pub k: usize,
    pub p: usize,
    pub phi: f64,
    pub phi_history: Vec<f64>,
    pub restart: usize,
}

/// Affinity, speaker count, spectral relaxation, discretization, timeline.
///
/// An all-zero `overlap` gives classical single-label spectral clustering.
pub fn diarize(embeddings: &EmbeddingSequence, overlap: &OverlapVector, cfg: &DiarizeConfig) -> Result<Diarization> {
    let n = embeddings.len();
    if overlap.len() != n {
        return Err(contract!("{} overlap flags for {} segments", overlap.len(), n));
    }
    let Some(count_cfg) = cfg.count.clipped_to(n) else {
        let assignment = AssignmentMatrix::from_rows(&[vec![1]], overlap.clone())?;
        let timeline = assignment_to_timeline(&assignment, embeddings.spans(), cluster_name)?;
        return Ok(Diarization {
            timeline,
            assignment,
            report: None,
            affinity: None,
            k: 1,
            p: 1,
            phi: 0.0,
            phi_history: Vec::new(),
            restart: 0,
        });
    };

    let raw = cosine_affinity(embeddings.vectors())?;
    let clean: Vec<usize> = (0..n).filter(|&i| !overlap.get(i)).collect();
    let restrict = cfg.clean_neighbors && clean.len() < n;
    let sub_cfg = if restrict {
        cfg.count.clipped_to(clean.len())
    } else {
        None
    };
    let (report, mask) = match sub_cfg {
        Some(sub_cfg) => {
            let sub = raw.select_rows(&clean).select_columns(&clean);
            let mask = (0..n).map(|i| !overlap.get(i)).collect();
            (estimate(&sub, &sub_cfg)?, Some(mask))
        }
        None => {
            if restrict {
                log::warn!("{} unflagged segments are too few to count on; using all", clean.len());
            }
            (estimate(&raw, &count_cfg)?, None)
        }
    };
    let k = report.k_hat;
    let bundle = AffinityBundle::build_restricted(raw, report.p_hat, mask)?;
    log::debug!("p_hat={} k_hat={} for {} segments", report.p_hat, k, n);

    let solution = continuous_solve(&bundle.binarized, &bundle.degree, k)?;
    let result = discretize(&solution, overlap, &cfg.discretize)?;
    let timeline = assignment_to_timeline(&result.assignment, embeddings.spans(), cluster_name)?;
    Ok(Diarization {
        timeline,
        assignment: result.assignment,
        p: report.p_hat,
        report: Some(report),
        affinity: Some(bundle),
        k,
        phi: result.phi,
        phi_history: result.phi_history,
        restart: result.restart,
    })
}
