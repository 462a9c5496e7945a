//! Segment geometry, embedding sequences and per-segment overlap flags.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One sliding-window segment of a recording.
///
/// `index` is the segment's ordinal in the source listing. It survives
/// re-sorting so that row-aligned side files (overlap flags) can be mapped
/// back onto the sorted sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentSpan {
    pub recording_id: String,
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl SegmentSpan {
    pub fn new(recording_id: impl Into<String>, index: usize, start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::Data(format!("segment {index}: non-finite bounds")));
        }
        if end <= start {
            return Err(Error::Data(format!(
                "segment {index}: non-positive duration ({start} .. {end})"
            )));
        }
        Ok(Self {
            recording_id: recording_id.into(),
            index,
            start,
            end,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// The embedding sequence `U`: one row per segment, sorted by span.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    spans: Vec<SegmentSpan>,
    vectors: DMatrix<f64>,
}

impl EmbeddingSequence {
    /// Validates and builds a sequence. Rows are re-sorted by
    /// `(recording_id, start, end, index)`; the input order is otherwise free.
    pub fn new(spans: Vec<SegmentSpan>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if spans.len() != rows.len() {
            return Err(Error::Contract(format!(
                "{} spans but {} embedding rows",
                spans.len(),
                rows.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Data("empty embedding sequence".into()));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::Data("embedding dimension is zero".into()));
        }
        for (span, row) in spans.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::Data(format!(
                    "segment {}: dimension {} differs from {}",
                    span.index,
                    row.len(),
                    dim
                )));
            }
            if span.end <= span.start {
                return Err(Error::Data(format!("segment {}: non-positive duration", span.index)));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("segment {}: non-finite value", span.index)));
            }
            let norm_sq: f64 = row.iter().map(|v| v * v).sum();
            if norm_sq <= 0.0 {
                return Err(Error::Data(format!("segment {}: zero-norm vector", span.index)));
            }
        }

        let mut order: Vec<usize> = (0..spans.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (&spans[a], &spans[b]);
            sa.recording_id
                .cmp(&sb.recording_id)
                .then(sa.start.total_cmp(&sb.start))
                .then(sa.end.total_cmp(&sb.end))
                .then(sa.index.cmp(&sb.index))
        });

        let n = spans.len();
        let vectors = DMatrix::from_fn(n, dim, |i, j| rows[order[i]][j]);
        let mut slots: Vec<Option<SegmentSpan>> = spans.into_iter().map(Some).collect();
        let spans = order
            .iter()
            .map(|&i| slots[i].take().expect("permutation visits each slot once"))
            .collect();
        Ok(Self { spans, vectors })
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn spans(&self) -> &[SegmentSpan] {
        &self.spans
    }

    /// N x D matrix, row `i` belongs to `spans()[i]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.vectors.row(i).iter().copied().collect()
    }

    /// Contiguous row ranges of each recording, in sorted order.
    pub fn recording_ranges(&self) -> Vec<(&str, Range<usize>)> {
        let mut out: Vec<(&str, Range<usize>)> = Vec::new();
        for (i, span) in self.spans.iter().enumerate() {
            match out.last_mut() {
                Some((id, range)) if *id == span.recording_id => range.end = i + 1,
                _ => out.push((span.recording_id.as_str(), i..i + 1)),
            }
        }
        out
    }

    /// Rows `range` as a sequence of their own.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::Contract(format!(
                "row range {range:?} outside 0..{}",
                self.len()
            )));
        }
        Ok(Self {
            spans: self.spans[range.clone()].to_vec(),
            vectors: self.vectors.rows(range.start, range.len()).into_owned(),
        })
    }
}

/// Per-segment overlap indicator `v_OL`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverlapVector {
    flags: Vec<bool>,
}

impl OverlapVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            flags: alloc::vec![false; n],
        }
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    /// Builds from 0/1 integers, rejecting anything else.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Data(format!("overlap flag {i}: {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_flags)
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.flags[i]
    }

    /// Extra labels required by row `i`: 0 or 1.
    pub fn extra(&self, i: usize) -> usize {
        usize::from(self.flags[i])
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        Self::from_flags(self.flags[range].to_vec())
    }

    /// Reorders flags given in source-listing order onto a sorted sequence.
    pub fn aligned_to(&self, spans: &[SegmentSpan]) -> Result<Self> {
        spans
            .iter()
            .map(|s| {
                self.flags.get(s.index).copied().ok_or_else(|| {
                    Error::Contract(format!(
                        "overlap flags cover {} segments, segment index {} requested",
                        self.flags.len(),
                        s.index
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_flags)
    }
}
