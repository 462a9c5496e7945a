//! Subcommand implementations. Human-readable output goes to `stdout`;
//! diagnostics go to the log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use ovsc_core::overlap_decode::{frames_to_flags, viterbi, DurationConfig, FrameClass};
use ovsc_core::pipeline::{diarize, Diarization, DiarizeConfig};
use ovsc_core::scoring::{der_score, DerBreakdown};
use ovsc_core::segments::OverlapVector;
use ovsc_core::speaker_count::CountConfig;
use ovsc_core::spectral::DiscretizeConfig;
use ovsc_core::synth::{generate, SynthConfig};

use crate::cli::{Cli, Command, DetectOverlapArgs, DiarizeArgs, GlobalOpts, ScoreArgs, SynthArgs};
use crate::error::{Error, Result};
use crate::ingest::{self, RecordingTimelines};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Log target of the run manifest, enabled at every level except `off`.
pub const MANIFEST_TARGET: &str = "ovsc::manifest";

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    jobs: usize,
    config: &'a C,
}

fn log_manifest<C: Serialize>(command: &str, global: &GlobalOpts, config: &C) {
    let manifest = Manifest {
        tool: "ovsc",
        version: VERSION,
        command,
        seed: global.seed,
        jobs: global.jobs,
        config,
    };
    match serde_json::to_string(&manifest) {
        Ok(json) => log::info!(target: MANIFEST_TARGET, "{json}"),
        Err(e) => log::warn!("manifest not serializable: {e}"),
    }
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

/// Runs one parsed command line.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Diarize(args) => run_diarize(args, &cli.global, stdout),
        Command::DetectOverlap(args) => run_detect_overlap(args, &cli.global, stdout),
        Command::Score(args) => run_score(args, &cli.global, stdout),
        Command::Synth(args) => run_synth(args, &cli.global, stdout),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

pub fn diarize_config(args: &DiarizeArgs, seed: u64) -> Result<DiarizeConfig> {
    if args.p_range.0 < 1 || args.p_range.1 < args.p_range.0 {
        return Err(Error::Usage(format!(
            "--p-range {}:{} must satisfy 1 <= MIN <= MAX",
            args.p_range.0, args.p_range.1
        )));
    }
    Ok(DiarizeConfig {
        count: CountConfig {
            p_min: args.p_range.0,
            p_max: args.p_range.1,
            max_speakers: args.max_speakers,
            ..CountConfig::default()
        },
        discretize: DiscretizeConfig {
            max_iters: args.max_iters,
            tol: args.tol,
            restarts: args.restarts,
            seed,
        },
        clean_neighbors: !args.all_neighbors,
    })
}

#[derive(Serialize)]
struct EigengapSummary<'a> {
    p_values: &'a [usize],
    g_p: &'a [f64],
    r_p: &'a [f64],
    p_hat: usize,
    k_hat: usize,
}

#[derive(Serialize)]
struct RecordingReport<'a> {
    recording_id: &'a str,
    segments: usize,
    flagged_segments: usize,
    speakers: usize,
    empty_clusters: usize,
    p: usize,
    phi: f64,
    phi_history: &'a [f64],
    restart: usize,
    eigengap: Option<EigengapSummary<'a>>,
}

#[derive(Serialize)]
struct DiarizeReport<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a DiarizeConfig,
    recordings: Vec<RecordingReport<'a>>,
}

fn safe_file_stem(recording: &str) -> String {
    recording
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn matrix_csv(m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn dump_affinity(dir: &Path, recording: &str, result: &Diarization) -> Result<()> {
    let Some(bundle) = &result.affinity else {
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = safe_file_stem(recording);
    for (name, m) in [
        ("affinity", &bundle.raw),
        ("binarized", &bundle.binarized),
        ("laplacian", &bundle.laplacian),
    ] {
        ingest::write_text(&dir.join(format!("{stem}.{name}.csv")), &matrix_csv(m))?;
    }
    Ok(())
}

pub fn run_diarize(args: &DiarizeArgs, global: &GlobalOpts, stdout: &mut dyn Write) -> Result<()> {
    let cfg = diarize_config(args, global.seed)?;
    log_manifest("diarize", global, &cfg);

    let embeddings = ingest::load_embeddings(&args.embeddings)?;
    let overlap = match &args.overlap_flags {
        Some(path) => {
            let flags = ingest::load_flags(path)?;
            if flags.len() != embeddings.len() {
                return Err(Error::Core(ovsc_core::Error::Data(format!(
                    "{}: {} flags for {} segments in {}",
                    path.display(),
                    flags.len(),
                    embeddings.len(),
                    args.embeddings.display()
                ))));
            }
            flags.aligned_to(embeddings.spans())?
        }
        None => OverlapVector::zeros(embeddings.len()),
    };

    let ranges = embeddings.recording_ranges();
    let pool = thread_pool(global.jobs)?;
    let results: Vec<Result<Diarization>> = pool.install(|| {
        ranges
            .par_iter()
            .map(|(_, range)| {
                let seq = embeddings.slice(range.clone())?;
                Ok(diarize(&seq, &overlap.slice(range.clone()), &cfg)?)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut timelines = RecordingTimelines::new();
    let mut summary = String::new();
    for ((recording, range), result) in ranges.iter().zip(&results) {
        timelines.insert(recording.to_string(), result.timeline.clone());
        let _ = writeln!(
            summary,
            "{recording}: {} segments ({} flagged), {} speakers, p={}, phi={:.6}",
            range.len(),
            overlap.slice(range.clone()).count(),
            result.k,
            result.p,
            result.phi
        );
        if let Some(dir) = &args.dump_affinity {
            dump_affinity(dir, recording, result)?;
        }
    }
    ingest::write_rttm(&timelines, &args.out)?;

    if let Some(path) = &args.report {
        let report = DiarizeReport {
            tool: "ovsc",
            version: VERSION,
            seed: global.seed,
            config: &cfg,
            recordings: ranges
                .iter()
                .zip(&results)
                .map(|((recording, range), r)| RecordingReport {
                    recording_id: recording,
                    segments: range.len(),
                    flagged_segments: r.assignment.overlap().count(),
                    speakers: r.k,
                    empty_clusters: r.assignment.empty_clusters(),
                    p: r.p,
                    phi: r.phi,
                    phi_history: &r.phi_history,
                    restart: r.restart,
                    eigengap: r.report.as_ref().map(|e| EigengapSummary {
                        p_values: &e.p_values,
                        g_p: &e.g_p,
                        r_p: &e.r_p,
                        p_hat: e.p_hat,
                        k_hat: e.k_hat,
                    }),
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        ingest::write_text(path, &json)?;
    }
    emit(stdout, &summary)
}

pub fn duration_config(args: &DetectOverlapArgs) -> DurationConfig {
    DurationConfig {
        min_silence: args.min_silence,
        max_silence: args.max_silence.0,
        min_single: args.min_single,
        max_single: args.max_single.0,
        min_overlap: args.min_overlap,
        max_overlap: args.max_overlap.0,
        bias: [args.bias_silence, args.bias_single, args.bias_overlap],
    }
}

pub fn run_detect_overlap(args: &DetectOverlapArgs, global: &GlobalOpts, stdout: &mut dyn Write) -> Result<()> {
    let cfg = duration_config(args);
    log_manifest("detect-overlap", global, &cfg);
    cfg.validate()?;

    let spans = args.segments.as_deref().map(ingest::load_spans).transpose()?;
    let listed_ids: Vec<&str> = spans
        .iter()
        .flatten()
        .map(|s| s.recording_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if listed_ids.len() > 1 {
        return Err(Error::Usage(format!(
            "segment listing spans {} recordings; posteriors cover one",
            listed_ids.len()
        )));
    }
    let recording = args
        .recording_id
        .clone()
        .or_else(|| listed_ids.first().map(|s| s.to_string()))
        .or_else(|| args.posteriors.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    if let (Some(explicit), Some(listed)) = (&args.recording_id, listed_ids.first()) {
        if explicit != listed {
            return Err(Error::Usage(format!(
                "--recording-id {explicit} does not match listing recording {listed}"
            )));
        }
    }

    let posteriors = ingest::load_posteriors(&args.posteriors, &recording, args.frame_shift)?;
    let labels = viterbi(&posteriors, &cfg)?;

    if let Some(path) = &args.lab {
        ingest::write_text(path, &ingest::format_overlap_lab(&labels))?;
    }
    let mut counts = [0usize; 3];
    for c in &labels.labels {
        counts[c.index()] += 1;
    }
    let regions = labels.regions(FrameClass::Overlap).len();
    match (&spans, &args.out) {
        (Some(spans), Some(out)) => {
            let flags = frames_to_flags(&labels, spans);
            ingest::write_flags(&flags, out)?;
            emit(
                stdout,
                &format!(
                    "{recording}: {} frames (silence {}, single {}, overlap {}), {regions} overlap regions, {} of {} segments flagged\n",
                    labels.labels.len(),
                    counts[0],
                    counts[1],
                    counts[2],
                    flags.count(),
                    spans.len()
                ),
            )
        }
        (Some(spans), None) => emit(stdout, &ingest::format_flags(&frames_to_flags(&labels, spans))),
        (None, Some(_)) => Err(Error::Usage("--out needs --segments to align flags with".into())),
        (None, None) => emit(
            stdout,
            &format!(
                "{recording}: {} frames (silence {}, single {}, overlap {}), {regions} overlap regions\n",
                labels.labels.len(),
                counts[0],
                counts[1],
                counts[2]
            ),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub collar: f64,
    pub recordings: BTreeMap<String, DerBreakdown>,
    pub total: DerBreakdown,
    /// Hypothesis recordings with no reference; not scored.
    pub unscored_hypothesis_recordings: Vec<String>,
}

pub fn score_files(reference: &Path, hypothesis: &Path, collar: f64, jobs: usize) -> Result<ScoreReport> {
    let refs = ingest::load_rttm(reference)?;
    let hyps = ingest::load_rttm(hypothesis)?;
    let empty = ovsc_core::timeline::Timeline::empty();
    let scored: Vec<(&String, &ovsc_core::timeline::Timeline)> = refs.iter().filter(|(_, t)| !t.is_empty()).collect();
    let pool = thread_pool(jobs)?;
    let parts: Vec<Result<(String, DerBreakdown)>> = pool.install(|| {
        scored
            .par_iter()
            .map(|(rec, r)| {
                let h = hyps.get(*rec).unwrap_or(&empty);
                Ok(((*rec).clone(), der_score(r, h, collar)?))
            })
            .collect()
    });
    let recordings: BTreeMap<String, DerBreakdown> = parts.into_iter().collect::<Result<_>>()?;
    if recordings.is_empty() {
        return Err(ovsc_core::Error::UndefinedRate(format!("{}: no reference speech", reference.display())).into());
    }
    let unscored: Vec<String> = hyps.keys().filter(|k| !recordings.contains_key(*k)).cloned().collect();
    for rec in &unscored {
        log::warn!("hypothesis recording {rec} has no reference and is not scored");
    }
    Ok(ScoreReport {
        collar,
        total: DerBreakdown::pool(recordings.values())?,
        recordings,
        unscored_hypothesis_recordings: unscored,
    })
}

pub fn format_score_table(report: &ScoreReport) -> String {
    let width = report
        .recordings
        .keys()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("recording".len());
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}\n",
        "recording", "MS", "FA", "Conf", "DER"
    );
    let mut line = |name: &str, b: &DerBreakdown| {
        let _ = writeln!(
            out,
            "{name:<width$}  {:>6.1}  {:>6.1}  {:>6.1}  {:>6.1}",
            b.missed, b.false_alarm, b.confusion, b.der
        );
    };
    for (rec, b) in &report.recordings {
        line(rec, b);
    }
    line("TOTAL", &report.total);
    out
}

pub fn run_score(args: &ScoreArgs, global: &GlobalOpts, stdout: &mut dyn Write) -> Result<()> {
    if !(args.collar >= 0.0 && args.collar.is_finite()) {
        return Err(Error::Usage(format!(
            "--collar must be a non-negative number, got {}",
            args.collar
        )));
    }
    log_manifest("score", global, &(&args.reference, &args.hyp, args.collar));
    let report = score_files(&args.reference, &args.hyp, args.collar, global.jobs)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    if let Some(path) = &args.json {
        ingest::write_text(path, &json)?;
    }
    emit(stdout, &format_score_table(&report))?;
    emit(stdout, &json)
}

/// Paths written by `synth`.
pub struct SynthPaths {
    pub embeddings: PathBuf,
    pub flags: PathBuf,
    pub reference: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            embeddings: dir.join("embeddings.tsv"),
            flags: dir.join("overlap_flags.txt"),
            reference: dir.join("reference.rttm"),
        }
    }
}

pub fn run_synth(args: &SynthArgs, global: &GlobalOpts, stdout: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        n_speakers: args.speakers,
        dim: args.dim,
        n_segments: args.segments,
        overlap_fraction: args.overlap_frac,
        noise_sigma: args.sigma,
        overlap_sigma: args.overlap_sigma,
        min_centroid_angle: args.min_angle,
        seed: global.seed,
        recording_id: args.recording_id.clone(),
        ..SynthConfig::default()
    };
    log_manifest("synth", global, &cfg);
    let out = generate(&cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let paths = SynthPaths::in_dir(&args.out_dir);
    ingest::save_embeddings(&out.embeddings, &paths.embeddings)?;
    ingest::write_flags(&out.overlap, &paths.flags)?;
    let reference: RecordingTimelines = [(cfg.recording_id.clone(), out.reference.clone())].into();
    ingest::write_rttm(&reference, &paths.reference)?;
    emit(
        stdout,
        &format!(
            "{}: {} segments, {} speakers, {} overlapped; wrote {}, {}, {}\n",
            cfg.recording_id,
            out.embeddings.len(),
            cfg.n_speakers,
            out.overlap.count(),
            paths.embeddings.display(),
            paths.flags.display(),
            paths.reference.display()
        ),
    )
}
