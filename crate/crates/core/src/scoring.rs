//! Diarization error rate with missed speech / false alarm / confusion split.
//!
//! The time axis is cut at every interval boundary. Within each region the
//! number of active reference speakers `R` and hypothesis speakers `H` give
//! `missed += max(0, R-H)`, `false alarm += max(0, H-R)` and `confusion +=
//! min(R, H) - correct`, all weighted by duration. `correct` counts active
//! hypothesis speakers mapped onto an active reference speaker under the
//! one-to-one mapping maximizing total co-occurrence time. Rates are
//! relative to the total scored reference speaker-time.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::timeline::Timeline;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerBreakdown {
    /// Percentages of `total_reference_speaker_time`.
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    pub der: f64,
    /// Seconds.
    pub missed_time: f64,
    pub false_alarm_time: f64,
    pub confusion_time: f64,
    pub total_reference_speaker_time: f64,
}

impl DerBreakdown {
    fn from_times(missed: f64, false_alarm: f64, confusion: f64, total: f64) -> Result<Self> {
        if !(total > 0.0) {
            return Err(Error::UndefinedRate("reference contains no scored speech".into()));
        }
        let pct = |x: f64| 100.0 * x / total;
        Ok(Self {
            missed: pct(missed),
            false_alarm: pct(false_alarm),
            confusion: pct(confusion),
            der: pct(missed) + pct(false_alarm) + pct(confusion),
            missed_time: missed,
            false_alarm_time: false_alarm,
            confusion_time: confusion,
            total_reference_speaker_time: total,
        })
    }

    /// Pools error times and reference time across recordings.
    pub fn pool<'a>(parts: impl IntoIterator<Item = &'a DerBreakdown>) -> Result<Self> {
        let (mut ms, mut fa, mut conf, mut total) = (0.0, 0.0, 0.0, 0.0);
        for p in parts {
            ms += p.missed_time;
            fa += p.false_alarm_time;
            conf += p.confusion_time;
            total += p.total_reference_speaker_time;
        }
        Self::from_times(ms, fa, conf, total)
    }
}

/// Optimal one-to-one hypothesis-to-reference label mapping.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeakerMapping {
    /// `(hypothesis, reference)` pairs, sorted by hypothesis label.
    pub pairs: Vec<(String, String)>,
    /// Summed co-occurrence time of the mapped pairs, in seconds.
    pub matched_time: f64,
}

impl SpeakerMapping {
    pub fn get(&self, hyp: &str) -> Option<&str> {
        self.pairs.iter().find(|(h, _)| h == hyp).map(|(_, r)| r.as_str())
    }
}

struct Region {
    duration: f64,
    reference: Vec<usize>,
    hypothesis: Vec<usize>,
}

struct Indexed {
    names: Vec<String>,
    /// Per speaker, sorted disjoint intervals.
    intervals: Vec<Vec<(f64, f64)>>,
}

fn index(timeline: &Timeline) -> Indexed {
    let mut by_name: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for e in timeline.normalized().entries() {
        by_name.entry(e.speaker.clone()).or_default().push((e.start, e.end));
    }
    let (names, intervals) = by_name.into_iter().unzip();
    Indexed { names, intervals }
}

/// Merged `[b - collar, b + collar]` zones around reference boundaries.
fn collar_zones(reference: &Indexed, collar: f64) -> Vec<(f64, f64)> {
    if collar <= 0.0 {
        return Vec::new();
    }
    let mut zones: Vec<(f64, f64)> = reference
        .intervals
        .iter()
        .flatten()
        .flat_map(|&(s, e)| [(s - collar, s + collar), (e - collar, e + collar)])
        .collect();
    zones.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(zones.len());
    for z in zones {
        match merged.last_mut() {
            Some(last) if z.0 <= last.1 => last.1 = last.1.max(z.1),
            _ => merged.push(z),
        }
    }
    merged
}

/// Tracks which intervals contain a monotonically increasing query point.
struct Cursor {
    next: Vec<usize>,
}

impl Cursor {
    fn new(n: usize) -> Self {
        Self { next: vec![0; n] }
    }

    fn active(&mut self, set: &Indexed, t: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for (s, spans) in set.intervals.iter().enumerate() {
            let i = &mut self.next[s];
            while *i < spans.len() && spans[*i].1 <= t {
                *i += 1;
            }
            if *i < spans.len() && spans[*i].0 <= t {
                out.push(s);
            }
        }
        out
    }
}

fn regions(reference: &Indexed, hypothesis: &Indexed, collar: f64) -> Vec<Region> {
    let zones = collar_zones(reference, collar);
    let mut cuts: Vec<f64> = reference
        .intervals
        .iter()
        .chain(&hypothesis.intervals)
        .flatten()
        .flat_map(|&(s, e)| [s, e])
        .chain(zones.iter().flat_map(|&(s, e)| [s, e]))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut ref_cursor = Cursor::new(reference.names.len());
    let mut hyp_cursor = Cursor::new(hypothesis.names.len());
    let mut zone = 0usize;
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        while zone < zones.len() && zones[zone].1 <= mid {
            zone += 1;
        }
        let reference_active = ref_cursor.active(reference, mid);
        let hypothesis_active = hyp_cursor.active(hypothesis, mid);
        if zone < zones.len() && zones[zone].0 <= mid {
            continue;
        }
        if reference_active.is_empty() && hypothesis_active.is_empty() {
            continue;
        }
        out.push(Region {
            duration: t1 - t0,
            reference: reference_active,
            hypothesis: hypothesis_active,
        });
    }
    out
}

fn optimal_mapping(regions: &[Region], n_ref: usize, n_hyp: usize) -> (Vec<Option<usize>>, f64) {
    let mut co = vec![vec![0.0_f64; n_ref]; n_hyp];
    for r in regions {
        for &h in &r.hypothesis {
            for &s in &r.reference {
                co[h][s] += r.duration;
            }
        }
    }
    let matched = max_weight_matching(&co);
    let time = matched
        .iter()
        .enumerate()
        .filter_map(|(h, s)| s.map(|s| co[h][s]))
        .sum();
    (matched, time)
}

/// One-to-one mapping of hypothesis labels onto reference labels maximizing
/// total co-occurrence time. Labels without overlap stay unmapped.
pub fn map_speakers(reference: &Timeline, hypothesis: &Timeline) -> SpeakerMapping {
    let reference = index(reference);
    let hypothesis = index(hypothesis);
    let regions = regions(&reference, &hypothesis, 0.0);
    let (matched, matched_time) = optimal_mapping(&regions, reference.names.len(), hypothesis.names.len());
    let mut co_any = vec![false; hypothesis.names.len()];
    for r in &regions {
        if !r.reference.is_empty() {
            for &h in &r.hypothesis {
                co_any[h] = true;
            }
        }
    }
    let pairs = matched
        .iter()
        .enumerate()
        .filter(|&(h, _)| co_any[h])
        .filter_map(|(h, s)| s.map(|s| (hypothesis.names[h].clone(), reference.names[s].clone())))
        .collect();
    SpeakerMapping { pairs, matched_time }
}

/// Scores `hypothesis` against `reference`, ignoring `±collar` seconds
/// around every reference boundary.
pub fn der_score(reference: &Timeline, hypothesis: &Timeline, collar: f64) -> Result<DerBreakdown> {
    if !(collar >= 0.0 && collar.is_finite()) {
        return Err(Error::Config(format!("collar must be non-negative, got {collar}")));
    }
    if reference.is_empty() {
        return Err(Error::UndefinedRate("empty reference timeline".into()));
    }
    let reference = index(reference);
    let hypothesis = index(hypothesis);
    let regions = regions(&reference, &hypothesis, collar);
    let (mapping, _) = optimal_mapping(&regions, reference.names.len(), hypothesis.names.len());

    let (mut missed, mut false_alarm, mut confusion, mut total) = (0.0, 0.0, 0.0, 0.0);
    for r in &regions {
        let n_ref = r.reference.len();
        let n_hyp = r.hypothesis.len();
        let correct = r
            .hypothesis
            .iter()
            .filter(|&&h| mapping[h].is_some_and(|s| r.reference.contains(&s)))
            .count();
        missed += n_ref.saturating_sub(n_hyp) as f64 * r.duration;
        false_alarm += n_hyp.saturating_sub(n_ref) as f64 * r.duration;
        confusion += (n_ref.min(n_hyp) - correct) as f64 * r.duration;
        total += n_ref as f64 * r.duration;
    }
    DerBreakdown::from_times(missed, false_alarm, confusion, total)
}
