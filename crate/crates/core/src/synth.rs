//! Synthetic conversations with known speakers, overlaps and embeddings.
//!
//! Speakers are unit centroids separated by at least `min_centroid_angle`.
//! Segments follow a sliding window; the conversation is a sequence of turns
//! (the first `n_speakers` turns visit every speaker once). A chosen fraction
//! of segments gets a second, different speaker. A single-speaker embedding is
//! `normalize(c_a + σ·n)`; an overlapped one is `normalize((c_a + c_b)/2 + σ'·n)`
//! with `n` standard normal.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::segments::{EmbeddingSequence, OverlapVector, SegmentSpan};
use crate::timeline::Timeline;

const MAX_CENTROID_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub dim: usize,
    pub n_segments: usize,
    pub overlap_fraction: f64,
    pub noise_sigma: f64,
    /// Noise level for overlapped segments; `noise_sigma` when unset.
    pub overlap_sigma: Option<f64>,
    /// Degrees.
    pub min_centroid_angle: f64,
    pub seed: u64,
    pub window: f64,
    pub stride: f64,
    /// Turn lengths are drawn uniformly from this inclusive range, in segments.
    pub turn_segments: (usize, usize),
    pub recording_id: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 3,
            dim: 16,
            n_segments: 60,
            overlap_fraction: 0.0,
            noise_sigma: 0.0,
            overlap_sigma: None,
            min_centroid_angle: 45.0,
            seed: 0,
            window: 1.5,
            stride: 0.75,
            turn_segments: (3, 8),
            recording_id: "synth".into(),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_speakers == 0 {
            return bad("n_speakers must be at least 1".into());
        }
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.n_segments == 0 {
            return bad("n_segments must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return bad(format!("overlap_fraction {} outside [0, 1)", self.overlap_fraction));
        }
        if self.overlap_fraction > 0.0 && self.n_speakers < 2 {
            return bad("overlaps need at least 2 speakers".into());
        }
        let sigmas = [self.noise_sigma, self.overlap_sigma.unwrap_or(0.0)];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise levels must be finite and non-negative".into());
        }
        if !(self.window > 0.0 && self.stride > 0.0) {
            return bad("window and stride must be positive".into());
        }
        let (lo, hi) = self.turn_segments;
        if lo == 0 || hi < lo {
            return bad(format!("invalid turn length range {lo}..={hi}"));
        }
        if !(0.0..=180.0).contains(&self.min_centroid_angle) {
            return bad(format!(
                "min_centroid_angle {} outside [0, 180]",
                self.min_centroid_angle
            ));
        }
        Ok(())
    }
}

/// Everything produced for one synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub embeddings: EmbeddingSequence,
    /// Oracle overlap flags, aligned with `embeddings`.
    pub overlap: OverlapVector,
    /// Normalized reference timeline with labels `speaker{k}`.
    pub reference: Timeline,
    /// Per segment: the true speaker indices (one, or two when overlapped).
    pub labels: Vec<Vec<usize>>,
    pub centroids: Vec<Vec<f64>>,
}

pub fn speaker_name(k: usize) -> String {
    format!("speaker{k}")
}

fn normalize(v: &mut [f64]) {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn centroids(cfg: &SynthConfig, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let max_cos = libm::cos(cfg.min_centroid_angle.to_radians());
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_speakers);
    let mut attempts = 0usize;
    while out.len() < cfg.n_speakers {
        attempts += 1;
        if attempts > MAX_CENTROID_ATTEMPTS {
            return Err(Error::Config(format!(
                "cannot place {} centroids {}° apart in {} dimensions",
                cfg.n_speakers, cfg.min_centroid_angle, cfg.dim
            )));
        }
        let mut c = gaussian(rng, cfg.dim);
        normalize(&mut c);
        let separated = out.iter().all(|o| {
            let dot: f64 = o.iter().zip(&c).map(|(a, b)| a * b).sum();
            dot <= max_cos
        });
        if separated {
            out.push(c);
        }
    }
    Ok(out)
}

fn turn_speakers(cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<usize> {
    let k = cfg.n_speakers;
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut primary = Vec::with_capacity(cfg.n_segments);
    let mut turn = 0usize;
    let mut current = order[0];
    while primary.len() < cfg.n_segments {
        if turn > 0 {
            current = if turn < k {
                order[turn]
            } else if k == 1 {
                0
            } else {
                let step = rng.random_range(1..k);
                (current + step) % k
            };
        }
        let len = rng.random_range(cfg.turn_segments.0..=cfg.turn_segments.1);
        for _ in 0..len {
            if primary.len() == cfg.n_segments {
                break;
            }
            primary.push(current);
        }
        turn += 1;
    }
    primary
}

/// Generates one recording. Identical configurations give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centroids = centroids(cfg, &mut rng)?;
    let primary = turn_speakers(cfg, &mut rng);

    let n = cfg.n_segments;
    let n_overlap = libm::round(cfg.overlap_fraction * n as f64) as usize;
    let mut labels: Vec<Vec<usize>> = primary.iter().map(|&p| vec![p]).collect();
    let mut chosen: Vec<usize> = index::sample(&mut rng, n, n_overlap).into_vec();
    chosen.sort_unstable();
    for &i in &chosen {
        let step = rng.random_range(1..cfg.n_speakers);
        labels[i].push((primary[i] + step) % cfg.n_speakers);
    }

    let overlap_sigma = cfg.overlap_sigma.unwrap_or(cfg.noise_sigma);
    let mut spans = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut reference = Timeline::empty();
    for (i, speakers) in labels.iter().enumerate() {
        let start = i as f64 * cfg.stride;
        let span = SegmentSpan::new(cfg.recording_id.clone(), i, start, start + cfg.window)?;
        let sigma = if speakers.len() > 1 {
            overlap_sigma
        } else {
            cfg.noise_sigma
        };
        let mut v = vec![0.0; cfg.dim];
        for &s in speakers {
            for (x, c) in v.iter_mut().zip(&centroids[s]) {
                *x += c / speakers.len() as f64;
            }
        }
        // Drawn even when sigma is 0 so that noise level alone varies output.
        let noise = gaussian(&mut rng, cfg.dim);
        for (x, z) in v.iter_mut().zip(&noise) {
            *x += sigma * z;
        }
        normalize(&mut v);
        for &s in speakers {
            reference.push(speaker_name(s), span.start, span.end)?;
        }
        spans.push(span);
        rows.push(v);
    }

    let flags = OverlapVector::from_flags(labels.iter().map(|l| l.len() > 1).collect());
    Ok(SynthOutput {
        embeddings: EmbeddingSequence::new(spans, rows)?,
        overlap: flags,
        reference: reference.normalized(),
        labels,
        centroids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig {
            noise_sigma: 0.1,
            overlap_fraction: 0.2,
            seed: 7,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn labels_match_flags_and_counts() {
        let cfg = SynthConfig {
            n_speakers: 4,
            n_segments: 80,
            overlap_fraction: 0.25,
            seed: 3,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert_eq!(out.overlap.count(), 20);
        for (i, l) in out.labels.iter().enumerate() {
            assert_eq!(l.len(), 1 + out.overlap.extra(i));
            if l.len() == 2 {
                assert_ne!(l[0], l[1]);
            }
        }
        let mut seen = [false; 4];
        for l in &out.labels {
            seen[l[0]] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn centroid_separation() {
        let cfg = SynthConfig {
            n_speakers: 6,
            min_centroid_angle: 60.0,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        for i in 0..6 {
            for j in 0..i {
                let dot: f64 = out.centroids[i].iter().zip(&out.centroids[j]).map(|(a, b)| a * b).sum();
                assert!(dot <= libm::cos(60f64.to_radians()) + 1e-12);
            }
        }
    }

    #[test]
    fn impossible_angle_is_config_error() {
        let cfg = SynthConfig {
            n_speakers: 5,
            dim: 2,
            min_centroid_angle: 100.0,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_configs() {
        let base = SynthConfig::default();
        for cfg in [
            SynthConfig {
                n_speakers: 0,
                ..base.clone()
            },
            SynthConfig { dim: 1, ..base.clone() },
            SynthConfig {
                overlap_fraction: 1.0,
                ..base.clone()
            },
            SynthConfig {
                n_speakers: 1,
                overlap_fraction: 0.1,
                ..base.clone()
            },
        ] {
            assert!(generate(&cfg).is_err());
        }
    }
}
