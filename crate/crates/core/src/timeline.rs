//! Speaker-attributed interval sets and conversion from cluster assignments.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::segments::SegmentSpan;
use crate::spectral::AssignmentMatrix;

/// Same-speaker intervals separated by at most this many seconds are merged.
pub const MERGE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimelineEntry {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
}

impl TimelineEntry {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A set of `(speaker, start, end)` intervals.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Timeline {
    entries: Vec<TimelineEntry>,
}

impl Timeline {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates `end > start` for every entry. The result is not normalized.
    pub fn new(entries: Vec<TimelineEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.start.is_finite() && e.end.is_finite()) || e.end <= e.start {
                return Err(Error::Data(format!(
                    "speaker {}: invalid interval {} .. {}",
                    e.speaker, e.start, e.end
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn push(&mut self, speaker: impl Into<String>, start: f64, end: f64) -> Result<()> {
        let speaker = speaker.into();
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::Data(format!(
                "speaker {speaker}: invalid interval {start} .. {end}"
            )));
        }
        self.entries.push(TimelineEntry { speaker, start, end });
        Ok(())
    }

    pub fn entries(&self) -> &[TimelineEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of interval durations over all entries.
    pub fn total_speaker_time(&self) -> f64 {
        self.entries.iter().map(TimelineEntry::duration).sum()
    }

    /// Distinct speaker labels in lexical order.
    pub fn speakers(&self) -> Vec<String> {
        let mut names: Vec<String> = self.entries.iter().map(|e| e.speaker.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Merges touching or overlapping intervals of the same speaker and sorts
    /// the result by `(start, speaker, end)`.
    pub fn normalized(&self) -> Self {
        let mut by_speaker: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for e in &self.entries {
            by_speaker.entry(e.speaker.as_str()).or_default().push((e.start, e.end));
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        for (speaker, mut spans) in by_speaker {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut current = spans[0];
            for &(s, e) in &spans[1..] {
                if s <= current.1 + MERGE_GAP {
                    current.1 = current.1.max(e);
                } else {
                    entries.push(TimelineEntry {
                        speaker: speaker.into(),
                        start: current.0,
                        end: current.1,
                    });
                    current = (s, e);
                }
            }
            entries.push(TimelineEntry {
                speaker: speaker.into(),
                start: current.0,
                end: current.1,
            });
        }
        sort_entries(&mut entries);
        Self { entries }
    }

    /// Shifts every interval by `offset` seconds.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| TimelineEntry {
                    speaker: e.speaker.clone(),
                    start: e.start + offset,
                    end: e.end + offset,
                })
                .collect(),
        }
    }

    /// Applies `rename` to every speaker label.
    pub fn relabeled(&self, mut rename: impl FnMut(&str) -> String) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| TimelineEntry {
                    speaker: rename(&e.speaker),
                    start: e.start,
                    end: e.end,
                })
                .collect(),
        }
    }

    /// Appends all entries of `other`.
    pub fn extend(&mut self, other: &Timeline) {
        self.entries.extend(other.entries.iter().cloned());
    }
}

pub(crate) fn sort_entries(entries: &mut [TimelineEntry]) {
    entries.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then_with(|| a.speaker.cmp(&b.speaker))
            .then(a.end.total_cmp(&b.end))
    });
}

/// Default cluster naming: column `k` becomes `spk{k}`.
pub fn cluster_name(k: usize) -> String {
    format!("spk{k}")
}

/// Turns a segment-by-cluster assignment into a normalized timeline.
///
/// Every set bit `(i, k)` contributes `(name(k), span_i.start, span_i.end)`.
/// Intervals of one cluster coming from overlapping windows are merged.
pub fn assignment_to_timeline(
    assignment: &AssignmentMatrix,
    spans: &[SegmentSpan],
    name: impl Fn(usize) -> String,
) -> Result<Timeline> {
    if assignment.rows() != spans.len() {
        return Err(Error::Contract(format!(
            "assignment has {} rows for {} spans",
            assignment.rows(),
            spans.len()
        )));
    }
    let mut raw = Timeline::empty();
    for (i, span) in spans.iter().enumerate() {
        for k in assignment.labels(i) {
            raw.push(name(k), span.start, span.end)?;
        }
    }
    Ok(raw.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segments::OverlapVector;
    use alloc::vec;

    fn entry(s: &str, a: f64, b: f64) -> TimelineEntry {
        TimelineEntry {
            speaker: s.into(),
            start: a,
            end: b,
        }
    }

    #[test]
    fn merges_touching_same_speaker() {
        let t = Timeline::new(vec![entry("spkA", 1.0, 2.0), entry("spkA", 0.0, 1.0)]).unwrap();
        assert_eq!(t.normalized().entries(), &[entry("spkA", 0.0, 2.0)]);
    }

    #[test]
    fn keeps_gaps_and_other_speakers() {
        let t = Timeline::new(vec![entry("b", 0.0, 1.0), entry("a", 0.5, 1.0), entry("a", 1.1, 2.0)])
            .unwrap()
            .normalized();
        assert_eq!(t.len(), 3);
        assert_eq!(t.entries()[0].speaker, "b");
    }

    #[test]
    fn rejects_inverted_interval() {
        assert!(Timeline::new(vec![entry("a", 1.0, 0.5)]).is_err());
    }

    #[test]
    fn single_row_assignment() {
        let spans = vec![SegmentSpan::new("r", 0, 0.0, 1.5).unwrap()];
        let x = AssignmentMatrix::from_rows(&[vec![1, 0]], OverlapVector::zeros(1)).unwrap();
        let t = assignment_to_timeline(&x, &spans, cluster_name).unwrap();
        assert_eq!(t.entries(), &[entry("spk0", 0.0, 1.5)]);
    }

    #[test]
    fn overlapping_row_gives_two_labels() {
        let spans = vec![SegmentSpan::new("r", 0, 0.0, 1.5).unwrap()];
        let x = AssignmentMatrix::from_rows(&[vec![1, 1]], OverlapVector::from_flags(vec![true])).unwrap();
        let t = assignment_to_timeline(&x, &spans, cluster_name).unwrap();
        assert_eq!(t.entries(), &[entry("spk0", 0.0, 1.5), entry("spk1", 0.0, 1.5)]);
    }

    #[test]
    fn consecutive_windows_merge() {
        let spans = vec![
            SegmentSpan::new("r", 0, 0.0, 1.5).unwrap(),
            SegmentSpan::new("r", 1, 0.75, 2.25).unwrap(),
        ];
        let x = AssignmentMatrix::from_rows(&[vec![1, 0], vec![1, 0]], OverlapVector::zeros(2)).unwrap();
        let t = assignment_to_timeline(&x, &spans, cluster_name).unwrap();
        assert_eq!(t.entries(), &[entry("spk0", 0.0, 2.25)]);
    }

    #[test]
    fn row_count_mismatch() {
        let x = AssignmentMatrix::from_rows(&[vec![1]], OverlapVector::zeros(1)).unwrap();
        assert!(assignment_to_timeline(&x, &[], cluster_name).is_err());
    }
}
