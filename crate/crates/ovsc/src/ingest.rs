//! Text formats: embeddings, segment listings, RTTM, frame posteriors and
//! overlap flags.
//!
//! * Embeddings: `recording<TAB>start<TAB>end<TAB>v1 v2 ... vD`, one segment
//!   per line, with an optional leading `#dim D` header that is enforced.
//! * Segment listings use the same first three fields; anything after them is
//!   ignored, so an embeddings file doubles as a listing.
//! * RTTM: 10-field `SPEAKER` records; other record types are skipped.
//! * Posteriors: `#frame_shift S`, then `p_silence p_single p_overlap` per frame.
//! * Flags: one `0` or `1` per line, in listing order.
//!
//! Blank lines and other lines starting with `#` are ignored everywhere.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ovsc_core::overlap_decode::{FrameClass, FrameLabels, FramePosteriors};
use ovsc_core::segments::{EmbeddingSequence, OverlapVector, SegmentSpan};
use ovsc_core::timeline::Timeline;

use crate::error::{Error, Result};

/// Timelines keyed by recording id.
pub type RecordingTimelines = BTreeMap<String, Timeline>;

/// Posterior rows may deviate from summing to one by this much.
const ROW_SUM_TOL: f64 = 1e-4;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers; `#` lines are returned
/// too so that callers can recognise headers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim().strip_prefix('#')?.trim_start();
    let value = rest.strip_prefix(key)?;
    value.starts_with(char::is_whitespace).then(|| value.trim())
}

fn number(path: &Path, line: usize, what: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{what}: cannot parse {field:?} as a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(path, line, format!("{what} is not finite")))
    }
}

fn span_fields(path: &Path, line: usize, index: usize, fields: &[&str]) -> Result<SegmentSpan> {
    let recording = fields[0].trim();
    if recording.is_empty() {
        return Err(Error::parse(path, line, "empty recording id"));
    }
    let start = number(path, line, "start", fields[1])?;
    let end = number(path, line, "end", fields[2])?;
    if end <= start {
        return Err(Error::parse(
            path,
            line,
            format!("non-positive duration: start {start}, end {end}"),
        ));
    }
    SegmentSpan::new(recording, index, start, end).map_err(|e| Error::parse(path, line, e.to_string()))
}

/// Parses embeddings text. Span indices are data-line ordinals, which is the
/// order flag files refer to.
pub fn parse_embeddings(text: &str, origin: &Path) -> Result<EmbeddingSequence> {
    let mut declared: Option<usize> = None;
    let mut spans = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, content) in content_lines(text) {
        if content.trim_start().starts_with('#') {
            if let Some(value) = header_value(content, "dim") {
                if !rows.is_empty() {
                    return Err(Error::parse(origin, line, "#dim header after the first segment"));
                }
                let dim = value
                    .parse::<usize>()
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| Error::parse(origin, line, format!("invalid dimension {value:?}")))?;
                declared = Some(dim);
            }
            continue;
        }
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let span = span_fields(origin, line, rows.len(), &fields)?;
        let vector = fields[3]
            .split_whitespace()
            .map(|f| number(origin, line, "embedding value", f))
            .collect::<Result<Vec<f64>>>()?;
        let expected = declared.or_else(|| rows.first().map(Vec::len));
        if let Some(dim) = expected {
            if vector.len() != dim {
                return Err(Error::parse(
                    origin,
                    line,
                    format!("dimension {} differs from {dim}", vector.len()),
                ));
            }
        } else if vector.is_empty() {
            return Err(Error::parse(origin, line, "empty embedding vector"));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(Error::parse(origin, line, "zero-norm embedding vector"));
        }
        spans.push(span);
        rows.push(vector);
    }
    if rows.is_empty() {
        return Err(Error::parse(origin, 0, "no segments"));
    }
    Ok(EmbeddingSequence::new(spans, rows)?)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSequence> {
    parse_embeddings(&read(path)?, path)
}

/// Rust's shortest round-trip float formatting keeps values bit-exact.
pub fn format_embeddings(seq: &EmbeddingSequence) -> String {
    let mut out = format!("#dim {}\n", seq.dim());
    for (i, span) in seq.spans().iter().enumerate() {
        let values: Vec<String> = seq.row(i).iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            span.recording_id,
            span.start,
            span.end,
            values.join(" ")
        );
    }
    out
}

pub fn save_embeddings(seq: &EmbeddingSequence, path: &Path) -> Result<()> {
    write(path, &format_embeddings(seq))
}

/// Spans of a segment listing, in file order.
pub fn parse_spans(text: &str, origin: &Path) -> Result<Vec<SegmentSpan>> {
    let mut spans = Vec::new();
    for (line, content) in content_lines(text) {
        if content.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected at least 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        spans.push(span_fields(origin, line, spans.len(), &fields)?);
    }
    Ok(spans)
}

pub fn load_spans(path: &Path) -> Result<Vec<SegmentSpan>> {
    parse_spans(&read(path)?, path)
}

/// Parses RTTM into normalized per-recording timelines.
pub fn parse_rttm(text: &str, origin: &Path) -> Result<RecordingTimelines> {
    let mut out = RecordingTimelines::new();
    for (line, content) in content_lines(text) {
        if content.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            log::debug!("{}:{line}: skipping {} record", origin.display(), fields[0]);
            continue;
        }
        if fields.len() != 10 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected 10 fields, found {}", fields.len()),
            ));
        }
        let onset = number(origin, line, "onset", fields[3])?;
        let duration = number(origin, line, "duration", fields[4])?;
        if onset < 0.0 {
            return Err(Error::parse(origin, line, format!("negative onset {onset}")));
        }
        if duration < 0.0 {
            return Err(Error::parse(origin, line, format!("negative duration {duration}")));
        }
        let timeline = out.entry(fields[1].to_string()).or_default();
        if duration == 0.0 {
            log::warn!("{}:{line}: zero-length turn ignored", origin.display());
            continue;
        }
        timeline
            .push(fields[7], onset, onset + duration)
            .map_err(|e| Error::parse(origin, line, e.to_string()))?;
    }
    Ok(out.into_iter().map(|(k, t)| (k, t.normalized())).collect())
}

pub fn load_rttm(path: &Path) -> Result<RecordingTimelines> {
    parse_rttm(&read(path)?, path)
}

/// One `SPEAKER` line per entry, onsets and durations in milliseconds
/// precision. Both ends are rounded, so abutting turns stay abutting.
pub fn format_rttm(recording: &str, timeline: &Timeline) -> String {
    let mut out = String::new();
    let mut entries: Vec<_> = timeline.entries().iter().collect();
    entries.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.speaker.cmp(&b.speaker)));
    for e in entries {
        let start_ms = (e.start * 1000.0).round();
        let end_ms = (e.end * 1000.0).round();
        if end_ms <= start_ms {
            log::warn!("{recording}: turn of {} shorter than 1 ms not written", e.speaker);
            continue;
        }
        let _ = writeln!(
            out,
            "SPEAKER {recording} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            start_ms / 1000.0,
            (end_ms - start_ms) / 1000.0,
            e.speaker
        );
    }
    out
}

pub fn write_rttm(timelines: &RecordingTimelines, path: &Path) -> Result<()> {
    let text: String = timelines.iter().map(|(rec, t)| format_rttm(rec, t)).collect();
    write(path, &text)
}

/// Parses a posteriors file. `frame_shift` overrides the header value.
pub fn parse_posteriors(
    text: &str,
    origin: &Path,
    recording_id: &str,
    frame_shift: Option<f64>,
) -> Result<FramePosteriors> {
    let mut header: Option<f64> = None;
    let mut rows = Vec::new();
    for (line, content) in content_lines(text) {
        if content.trim_start().starts_with('#') {
            if let Some(value) = header_value(content, "frame_shift") {
                let shift = number(origin, line, "frame shift", value)?;
                if shift <= 0.0 {
                    return Err(Error::parse(
                        origin,
                        line,
                        format!("frame shift {shift} is not positive"),
                    ));
                }
                header = Some(shift);
            }
            continue;
        }
        let values = content
            .split_whitespace()
            .map(|f| number(origin, line, "posterior", f))
            .collect::<Result<Vec<f64>>>()?;
        let row: [f64; 3] = values
            .try_into()
            .map_err(|v: Vec<f64>| Error::parse(origin, line, format!("expected 3 posteriors, found {}", v.len())))?;
        if row.iter().any(|&p| p < 0.0) {
            return Err(Error::parse(origin, line, "negative posterior"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::parse(origin, line, format!("posteriors sum to {sum}, not 1")));
        }
        rows.push(row);
    }
    let shift = match (frame_shift, header) {
        (Some(cli), Some(file)) => {
            if cli != file {
                log::warn!("{}: frame shift {file} overridden by {cli}", origin.display());
            }
            cli
        }
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => {
            return Err(Error::Usage(format!(
                "{}: no #frame_shift header and no frame shift given",
                origin.display()
            )))
        }
    };
    if rows.is_empty() {
        return Err(Error::parse(origin, 0, "no frames"));
    }
    Ok(FramePosteriors::new(recording_id, shift, rows)?)
}

pub fn load_posteriors(path: &Path, recording_id: &str, frame_shift: Option<f64>) -> Result<FramePosteriors> {
    parse_posteriors(&read(path)?, path, recording_id, frame_shift)
}

pub fn format_posteriors(posteriors: &FramePosteriors) -> String {
    let mut out = format!("#frame_shift {}\n", posteriors.frame_shift);
    for row in posteriors.rows() {
        let _ = writeln!(out, "{} {} {}", row[0], row[1], row[2]);
    }
    out
}

pub fn parse_flags(text: &str, origin: &Path) -> Result<OverlapVector> {
    let mut flags = Vec::new();
    for (line, content) in content_lines(text) {
        match content.trim() {
            "0" => flags.push(false),
            "1" => flags.push(true),
            s if s.starts_with('#') => {}
            other => return Err(Error::parse(origin, line, format!("expected 0 or 1, found {other:?}"))),
        }
    }
    Ok(OverlapVector::from_flags(flags))
}

pub fn load_flags(path: &Path) -> Result<OverlapVector> {
    parse_flags(&read(path)?, path)
}

pub fn format_flags(flags: &OverlapVector) -> String {
    flags.flags().iter().map(|&f| if f { "1\n" } else { "0\n" }).collect()
}

pub fn write_flags(flags: &OverlapVector, path: &Path) -> Result<()> {
    write(path, &format_flags(flags))
}

/// Overlap regions as `start<TAB>end<TAB>overlap` label lines.
pub fn format_overlap_lab(labels: &FrameLabels) -> String {
    let mut out = String::new();
    for (start, end) in labels.regions(FrameClass::Overlap) {
        let _ = writeln!(out, "{start:.3}\t{end:.3}\toverlap");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("t")
    }

    #[test]
    fn embeddings_readback() {
        let seq = parse_embeddings("r\t0\t1.5\t1 0 0\nr\t0.75\t2.25\t0 1 0\n", p()).unwrap();
        assert_eq!((seq.len(), seq.dim()), (2, 3));
    }

    #[test]
    fn embeddings_errors_carry_line_numbers() {
        let err = parse_embeddings("#dim 3\nr\t0\t1\t1 0 0\n\nr\t1\t2\t1 0 0 0\n", p()).unwrap_err();
        assert!(err.to_string().starts_with("t:4:"), "{err}");
        let err = parse_embeddings("r\t0\t1\t1 2\nr\t1\t2\t1 2 3\n", p()).unwrap_err();
        assert!(err.to_string().contains("t:2: dimension 3 differs from 2"), "{err}");
        for bad in [
            "r\t0\t1\t0 0\n",
            "r\t1\t1\t1 0\n",
            "r\t0\t1\t1 x\n",
            "r\t0\t1\n",
            "#dim 0\n",
        ] {
            assert!(
                matches!(parse_embeddings(bad, p()), Err(Error::Parse { line: 1, .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn rttm_format_definition() {
        let t = parse_rttm("SPEAKER rec 1 0.00 1.50 <NA> <NA> spkA <NA> <NA>\n", p()).unwrap();
        assert_eq!(t["rec"].entries().len(), 1);
        let e = &t["rec"].entries()[0];
        assert_eq!((e.speaker.as_str(), e.start, e.end), ("spkA", 0.0, 1.5));

        let mut one = Timeline::empty();
        one.push("s1", 0.0, 0.75).unwrap();
        assert_eq!(
            format_rttm("rec", &one),
            "SPEAKER rec 1 0.000 0.750 <NA> <NA> s1 <NA> <NA>\n"
        );
        assert_eq!(format_rttm("rec", &Timeline::empty()), "");
    }

    #[test]
    fn rttm_adjacent_turns_merge() {
        let text = "SPEAKER rec 1 0 1 <NA> <NA> spkA <NA> <NA>\nSPEAKER rec 1 1 1 <NA> <NA> spkA <NA> <NA>\n";
        let t = parse_rttm(text, p()).unwrap();
        let e = &t["rec"].entries();
        assert_eq!((e.len(), e[0].start, e[0].end), (1, 0.0, 2.0));
    }

    #[test]
    fn rttm_errors() {
        let err = parse_rttm("SPEAKER rec 1 0 1 <NA> <NA> a <NA> <NA>\nSPEAKER rec 1 0 1\n", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_rttm("SPEAKER rec 1 0 -1 <NA> <NA> a <NA> <NA>\n", p()).unwrap_err();
        assert!(err.to_string().contains("negative duration"));
        let skipped = parse_rttm("SPKR-INFO rec 1 <NA> <NA> <NA> unknown a <NA> <NA>\n", p()).unwrap();
        assert!(skipped.is_empty());
    }

    #[test]
    fn posteriors_and_flags() {
        let post = parse_posteriors("#frame_shift 0.01\n0.2 0.7 0.1\n1 0 0\n", p(), "r", None).unwrap();
        assert_eq!((post.len(), post.frame_shift), (2, 0.01));
        assert_eq!(
            parse_posteriors("0.2 0.7 0.1\n", p(), "r", Some(0.02))
                .unwrap()
                .frame_shift,
            0.02
        );
        assert!(matches!(
            parse_posteriors("0.2 0.7 0.1\n", p(), "r", None),
            Err(Error::Usage(_))
        ));
        let err = parse_posteriors("#frame_shift 0.01\n0.5 0.6 0.1\n", p(), "r", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        let flags = parse_flags("0\n1\n\n0\n", p()).unwrap();
        assert_eq!(flags.flags(), &[false, true, false]);
        assert_eq!(format_flags(&flags), "0\n1\n0\n");
        assert!(matches!(parse_flags("0\n2\n", p()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn spans_ignore_trailing_fields() {
        let spans = parse_spans("r\t0\t1.5\t1 2 3\nr\t0.75\t2.25\n", p()).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1].index, 1);
    }
}
