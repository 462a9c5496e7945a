//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

#[derive(Debug, Parser)]
#[command(
    name = "ovsc",
    version,
    about = "Overlap-aware spectral clustering for speaker diarization"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for discretization restarts and synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-recording work (0: one per core).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// One of off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: LevelFilter,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            log_level: LevelFilter::Warn,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster segment embeddings into a speaker timeline (RTTM).
    Diarize(DiarizeArgs),
    /// Decode frame posteriors into overlap regions and segment flags.
    DetectOverlap(DetectOverlapArgs),
    /// Score a hypothesis RTTM against a reference RTTM.
    Score(ScoreArgs),
    /// Write a synthetic conversation: embeddings, oracle flags, reference.
    Synth(SynthArgs),
}

/// Inclusive `MIN:MAX` range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PRange(pub usize, pub usize);

impl std::str::FromStr for PRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
        let lo = lo.trim().parse().map_err(|_| format!("invalid minimum in {s:?}"))?;
        let hi = hi.trim().parse().map_err(|_| format!("invalid maximum in {s:?}"))?;
        Ok(Self(lo, hi))
    }
}

#[derive(Debug, Clone, Args)]
pub struct DiarizeArgs {
    /// Embeddings file.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Overlap flags aligned with the embeddings file; absent means no overlaps.
    #[arg(long)]
    pub overlap_flags: Option<PathBuf>,
    /// Output RTTM.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report with per-recording diagnostics.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for CSV dumps of the affinity, binarized and Laplacian matrices.
    #[arg(long)]
    pub dump_affinity: Option<PathBuf>,
    /// Neighbor counts swept when tuning the binarization.
    #[arg(long, default_value = "2:20")]
    pub p_range: PRange,
    /// Upper bound on the estimated number of speakers.
    #[arg(long, default_value_t = 10)]
    pub max_speakers: usize,
    /// Alternation rounds per discretization restart.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Stop when the objective improves by less than this.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seeded discretization runs; the lowest objective wins.
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    /// Let flagged segments count speakers and act as graph neighbors too.
    #[arg(long)]
    pub all_neighbors: bool,
}

/// A duration bound in seconds, or `none` for unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub Option<f64>);

impl std::str::FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" | "inf" => Ok(Self(None)),
            v => v
                .parse()
                .map(|x| Self(Some(x)))
                .map_err(|_| format!("expected seconds or `none`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectOverlapArgs {
    /// Posteriors file.
    #[arg(long)]
    pub posteriors: PathBuf,
    /// Frame shift in seconds; overrides the file header.
    #[arg(long)]
    pub frame_shift: Option<f64>,
    /// Segment listing to flag (embeddings file or `rec<TAB>start<TAB>end`).
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Output flag file; flags go to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overlap regions as `start<TAB>end<TAB>overlap` lines.
    #[arg(long)]
    pub lab: Option<PathBuf>,
    /// Recording id; defaults to the listing's, else the posteriors file stem.
    #[arg(long)]
    pub recording_id: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub min_silence: f64,
    #[arg(long, default_value = "none")]
    pub max_silence: Bound,
    #[arg(long, default_value_t = 0.03)]
    pub min_single: f64,
    #[arg(long, default_value = "10")]
    pub max_single: Bound,
    #[arg(long, default_value_t = 0.1)]
    pub min_overlap: f64,
    #[arg(long, default_value = "5")]
    pub max_overlap: Bound,
    #[arg(long, default_value_t = 1.0)]
    pub bias_silence: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bias_single: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bias_overlap: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub hyp: PathBuf,
    /// Seconds excluded on each side of every reference boundary.
    #[arg(long, default_value_t = 0.0)]
    pub collar: f64,
    /// Also write the JSON breakdown to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub speakers: usize,
    #[arg(long)]
    pub segments: usize,
    #[arg(long, default_value_t = 0.0)]
    pub overlap_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Noise level for overlapped segments; `--sigma` when omitted.
    #[arg(long)]
    pub overlap_sigma: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Minimum angle between speaker centroids, degrees.
    #[arg(long, default_value_t = 45.0)]
    pub min_angle: f64,
    #[arg(long, default_value = "synth")]
    pub recording_id: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!("2:20".parse::<PRange>().unwrap(), PRange(2, 20));
        assert!("2-20".parse::<PRange>().is_err());
        assert_eq!("none".parse::<Bound>().unwrap(), Bound(None));
        assert_eq!("0.5".parse::<Bound>().unwrap(), Bound(Some(0.5)));
    }

    #[test]
    fn globals_after_subcommand() {
        let cli = Cli::try_parse_from([
            "ovsc",
            "synth",
            "--speakers",
            "2",
            "--segments",
            "10",
            "--out-dir",
            "d",
            "--seed",
            "7",
        ])
        .unwrap();
        assert_eq!(cli.global.seed, 7);
        assert!(Cli::try_parse_from(["ovsc", "score", "--ref", "a", "--hyp", "b", "--bogus"]).is_err());
    }
}
