//! Duration-constrained decoding of frame-level {silence, single, overlap}
//! posteriors, and conversion of the decoded frames into segment flags.
//!
//! Each class expands into a left-to-right chain of states: the first
//! `min` states are mandatory, the following ones up to `max` are optional
//! extensions (an unbounded class ends in a self-looping state). A run may
//! leave its chain only from a state at or past its minimum, and only towards
//! a permitted class: silence and overlap never touch, so overlap is always
//! entered and left through single-speaker speech. In-chain arcs carry no
//! score; the path score is the sum of per-frame `ln(bias_c · p_c(t))`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::segments::{OverlapVector, SegmentSpan};

/// Lower bound on a frame's emission probability after bias scaling, so
/// that zero posteriors penalize a path rather than make it infeasible.
pub const EMISSION_FLOOR: f64 = f64::MIN_POSITIVE;

/// Slack used when converting seconds to frame counts.
const FRAME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FrameClass {
    Silence,
    Single,
    Overlap,
}

impl FrameClass {
    pub const ALL: [FrameClass; 3] = [FrameClass::Silence, FrameClass::Single, FrameClass::Overlap];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether a run of `self` may be followed directly by a run of `next`.
    pub fn may_precede(self, next: FrameClass) -> bool {
        use FrameClass::*;
        matches!(
            (self, next),
            (Silence, Single) | (Single, Silence) | (Single, Overlap) | (Overlap, Single)
        )
    }
}

/// Per-frame class posteriors, columns ordered (silence, single, overlap).
#[derive(Debug, Clone, PartialEq)]
pub struct FramePosteriors {
    pub recording_id: alloc::string::String,
    pub frame_shift: f64,
    rows: Vec<[f64; 3]>,
}

impl FramePosteriors {
    /// Validates non-negativity and that each row sums to 1 within 1e-4.
    pub fn new(recording_id: impl Into<alloc::string::String>, frame_shift: f64, rows: Vec<[f64; 3]>) -> Result<Self> {
        if !(frame_shift > 0.0 && frame_shift.is_finite()) {
            return Err(Error::Data(format!("frame shift must be positive, got {frame_shift}")));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Data(format!("frame {t}: negative or non-finite posterior")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-4 {
                return Err(Error::Data(format!("frame {t}: posteriors sum to {sum}")));
            }
        }
        Ok(Self {
            recording_id: recording_id.into(),
            frame_shift,
            rows,
        })
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Duration bounds in seconds and per-class posterior scaling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DurationConfig {
    pub min_silence: f64,
    pub max_silence: Option<f64>,
    pub min_single: f64,
    pub max_single: Option<f64>,
    pub min_overlap: f64,
    pub max_overlap: Option<f64>,
    /// Multiplicative weights for (silence, single, overlap).
    pub bias: [f64; 3],
}

impl Default for DurationConfig {
    fn default() -> Self {
        Self {
            min_silence: 0.01,
            max_silence: None,
            min_single: 0.03,
            max_single: Some(10.0),
            min_overlap: 0.1,
            max_overlap: Some(5.0),
            bias: [1.0; 3],
        }
    }
}

impl DurationConfig {
    fn bounds(&self, class: FrameClass) -> (f64, Option<f64>) {
        match class {
            FrameClass::Silence => (self.min_silence, self.max_silence),
            FrameClass::Single => (self.min_single, self.max_single),
            FrameClass::Overlap => (self.min_overlap, self.max_overlap),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for class in FrameClass::ALL {
            let (min, max) = self.bounds(class);
            if !(min > 0.0 && min.is_finite()) {
                return Err(Error::Config(format!("{class:?}: minimum duration must be positive")));
            }
            if let Some(max) = max {
                if !(max >= min) {
                    return Err(Error::Config(format!(
                        "{class:?}: maximum duration {max} below minimum {min}"
                    )));
                }
            }
            if !(self.bias[class.index()] > 0.0 && self.bias[class.index()].is_finite()) {
                return Err(Error::Config(format!("{class:?}: bias must be positive")));
            }
        }
        Ok(())
    }
}

fn frames(seconds: f64, frame_shift: f64) -> usize {
    let f = libm::ceil(seconds / frame_shift - FRAME_EPS);
    f.max(1.0) as usize
}

/// Chain geometry of one class, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassChain {
    pub min_frames: usize,
    /// `None` means the last state loops on itself.
    pub max_frames: Option<usize>,
}

impl ClassChain {
    /// Number of states in the chain.
    pub fn len(&self) -> usize {
        self.max_frames.unwrap_or(self.min_frames)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0-based positions from which the run may end.
    pub fn can_exit(&self, position: usize) -> bool {
        position + 1 >= self.min_frames
    }

    fn self_loop(&self) -> bool {
        self.max_frames.is_none()
    }
}

/// A state of the expanded duration HMM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HmmState {
    pub class: FrameClass,
    pub position: usize,
}

/// The expanded state graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationHmm {
    pub frame_shift: f64,
    pub chains: [ClassChain; 3],
    bias: [f64; 3],
}

impl DurationHmm {
    pub fn build(cfg: &DurationConfig, frame_shift: f64) -> Result<Self> {
        cfg.validate()?;
        if !(frame_shift > 0.0 && frame_shift.is_finite()) {
            return Err(Error::Config(format!(
                "frame shift must be positive, got {frame_shift}"
            )));
        }
        let mut chains = [ClassChain {
            min_frames: 1,
            max_frames: None,
        }; 3];
        for class in FrameClass::ALL {
            let (min, max) = cfg.bounds(class);
            if min + FRAME_EPS < frame_shift {
                return Err(Error::Config(format!(
                    "{class:?}: minimum duration {min}s is shorter than one frame ({frame_shift}s)"
                )));
            }
            let min_frames = frames(min, frame_shift);
            let max_frames = max.map(|m| frames(m, frame_shift).max(min_frames));
            chains[class.index()] = ClassChain { min_frames, max_frames };
        }
        Ok(Self {
            frame_shift,
            chains,
            bias: cfg.bias,
        })
    }

    pub fn chain(&self, class: FrameClass) -> ClassChain {
        self.chains[class.index()]
    }

    /// All states in (class, position) order.
    pub fn states(&self) -> Vec<HmmState> {
        FrameClass::ALL
            .iter()
            .flat_map(|&class| (0..self.chain(class).len()).map(move |position| HmmState { class, position }))
            .collect()
    }

    /// Whether the graph has an arc `from -> to`.
    pub fn allows(&self, from: HmmState, to: HmmState) -> bool {
        let chain = self.chain(from.class);
        if from.class == to.class {
            let advance = to.position == from.position + 1 && to.position < chain.len();
            let stay = chain.self_loop() && from.position + 1 == chain.len() && to == from;
            advance || stay
        } else {
            to.position == 0 && chain.can_exit(from.position) && from.class.may_precede(to.class)
        }
    }

    /// Dense transition matrix over [`Self::states`] with 1.0 on arcs and
    /// 0.0 elsewhere. Intended for inspection of small graphs.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let states = self.states();
        states
            .iter()
            .map(|&a| {
                states
                    .iter()
                    .map(|&b| if self.allows(a, b) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// `ln(bias_c · p_c)`, floored at `ln(EMISSION_FLOOR)`.
    pub fn emission(&self, posterior: &[f64; 3], class: FrameClass) -> f64 {
        let c = class.index();
        libm::log((self.bias[c] * posterior[c]).max(EMISSION_FLOOR))
    }
}

/// A decoded frame label sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabels {
    pub labels: Vec<FrameClass>,
    pub frame_shift: f64,
}

impl FrameLabels {
    /// Maximal runs as `(class, first_frame, length)`.
    pub fn runs(&self) -> Vec<(FrameClass, usize, usize)> {
        let mut runs: Vec<(FrameClass, usize, usize)> = Vec::new();
        for (t, &c) in self.labels.iter().enumerate() {
            match runs.last_mut() {
                Some(last) if last.0 == c => last.2 += 1,
                _ => runs.push((c, t, 1)),
            }
        }
        runs
    }

    /// Time regions `(start, end)` labelled `class`.
    pub fn regions(&self, class: FrameClass) -> Vec<(f64, f64)> {
        self.runs()
            .into_iter()
            .filter(|r| r.0 == class)
            .map(|(_, t, len)| (t as f64 * self.frame_shift, (t + len) as f64 * self.frame_shift))
            .collect()
    }
}

/// Decoder output: the best label path and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub labels: FrameLabels,
    pub score: f64,
}

#[derive(Clone, Copy)]
enum EntryFrom {
    Start,
    Exit { class: FrameClass, position: usize },
    SelfLoop,
}

struct Backpointers {
    entry: [EntryFrom; 3],
    tail_from_self: [bool; 3],
}

/// Most likely label sequence under the duration constraints.
pub fn viterbi(posteriors: &FramePosteriors, cfg: &DurationConfig) -> Result<FrameLabels> {
    viterbi_with_score(posteriors, cfg).map(|d| d.labels)
}

/// [`viterbi`], also returning the path score.
///
/// Score ties are broken towards the lower class (silence < single <
/// overlap), then the lower chain position.
pub fn viterbi_with_score(posteriors: &FramePosteriors, cfg: &DurationConfig) -> Result<Decoded> {
    let hmm = DurationHmm::build(cfg, posteriors.frame_shift)?;
    let rows = posteriors.rows();
    let t_len = rows.len();
    if t_len == 0 {
        return Err(Error::Data("posteriors contain no frames".into()));
    }

    let lens = hmm.chains.map(|c| c.len());
    let mut score: [Vec<f64>; 3] = lens.map(|l| alloc::vec![f64::NEG_INFINITY; l]);
    let mut next: [Vec<f64>; 3] = lens.map(|l| alloc::vec![f64::NEG_INFINITY; l]);
    let mut back: Vec<Backpointers> = Vec::with_capacity(t_len);

    for class in FrameClass::ALL {
        score[class.index()][0] = hmm.emission(&rows[0], class);
    }
    back.push(Backpointers {
        entry: [EntryFrom::Start; 3],
        tail_from_self: [false; 3],
    });

    for row in rows.iter().skip(1) {
        // Best exit-eligible state of every class at t-1.
        let mut best_exit = [(f64::NEG_INFINITY, 0usize); 3];
        for class in FrameClass::ALL {
            let chain = hmm.chain(class);
            let s = &score[class.index()];
            let first = chain.min_frames.saturating_sub(1);
            for (pos, &v) in s.iter().enumerate().skip(first) {
                if v > best_exit[class.index()].0 {
                    best_exit[class.index()] = (v, pos);
                }
            }
        }

        let mut bp = Backpointers {
            entry: [EntryFrom::Start; 3],
            tail_from_self: [false; 3],
        };
        for class in FrameClass::ALL {
            let c = class.index();
            let chain = hmm.chain(class);
            let emit = hmm.emission(row, class);
            let prev = &score[c];
            let out = &mut next[c];

            let mut entry = (f64::NEG_INFINITY, EntryFrom::Start);
            for from in FrameClass::ALL {
                if from.may_precede(class) && best_exit[from.index()].0 > entry.0 {
                    entry = (
                        best_exit[from.index()].0,
                        EntryFrom::Exit {
                            class: from,
                            position: best_exit[from.index()].1,
                        },
                    );
                }
            }
            let last = chain.len() - 1;
            if chain.self_loop() && last == 0 && prev[0] > entry.0 {
                entry = (prev[0], EntryFrom::SelfLoop);
            }
            out[0] = entry.0 + emit;
            bp.entry[c] = entry.1;

            for pos in 1..chain.len() {
                let mut v = prev[pos - 1];
                if chain.self_loop() && pos == last && prev[pos] > v {
                    v = prev[pos];
                    bp.tail_from_self[c] = true;
                }
                out[pos] = v + emit;
            }
        }
        back.push(bp);
        core::mem::swap(&mut score, &mut next);
    }

    let mut end: Option<(f64, FrameClass, usize)> = None;
    for class in FrameClass::ALL {
        let chain = hmm.chain(class);
        for (pos, &v) in score[class.index()].iter().enumerate() {
            if chain.can_exit(pos) && v > end.map_or(f64::NEG_INFINITY, |e| e.0) {
                end = Some((v, class, pos));
            }
        }
    }
    let (best, mut class, mut pos) = end.ok_or_else(|| {
        Error::Infeasible(format!(
            "{t_len} frames cannot be segmented under the duration bounds {:?}",
            hmm.chains
        ))
    })?;

    let mut labels = alloc::vec![FrameClass::Silence; t_len];
    for t in (0..t_len).rev() {
        labels[t] = class;
        if t == 0 {
            break;
        }
        let bp = &back[t];
        let chain = hmm.chain(class);
        if pos == 0 {
            match bp.entry[class.index()] {
                EntryFrom::Exit { class: from, position } => {
                    class = from;
                    pos = position;
                }
                EntryFrom::SelfLoop => {}
                EntryFrom::Start => unreachable!("only frame 0 starts a path"),
            }
        } else if !(pos == chain.len() - 1 && bp.tail_from_self[class.index()]) {
            pos -= 1;
        }
    }

    Ok(Decoded {
        labels: FrameLabels {
            labels,
            frame_shift: posteriors.frame_shift,
        },
        score: best,
    })
}

/// Flags segment `i` when overlap-labelled frames cover at least half of it.
///
/// Frame `t` spans `[t·shift, (t+1)·shift)`. Time past the last frame counts
/// as silence.
pub fn frames_to_flags(labels: &FrameLabels, spans: &[SegmentSpan]) -> OverlapVector {
    let regions = labels.regions(FrameClass::Overlap);
    let covered_until = labels.labels.len() as f64 * labels.frame_shift;
    let mut padded = 0usize;
    let flags = spans
        .iter()
        .map(|span| {
            if span.end > covered_until + FRAME_EPS {
                padded += 1;
            }
            let overlap: f64 = regions
                .iter()
                .map(|&(s, e)| (e.min(span.end) - s.max(span.start)).max(0.0))
                .sum();
            overlap + FRAME_EPS >= 0.5 * span.duration()
        })
        .collect();
    if padded > 0 {
        log::warn!("{padded} segments extend past the last frame; treating the gap as silence");
    }
    OverlapVector::from_flags(flags)
}
