//! Overlap-aware spectral clustering for speaker diarization.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic stage:
//! cosine affinity and p-binarization ([`affinity`]), eigengap speaker
//! counting ([`speaker_count`]), normalized-cuts relaxation and the
//! overlap-constrained discretization ([`spectral`]), the duration-constrained
//! Viterbi overlap decoder ([`overlap_decode`]), DER scoring ([`scoring`]) and
//! a synthetic conversation generator ([`synth`]). [`pipeline::diarize`] chains
//! the clustering stages for one recording. File formats and the CLI live in
//! the `ovsc` crate.
#![no_std]
#![forbid(unsafe_code)]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod affinity;
pub mod assignment;
pub mod error;
mod linalg;
pub mod overlap_decode;
pub mod pipeline;
pub mod scoring;
pub mod segments;
pub mod speaker_count;
pub mod spectral;
pub mod synth;
pub mod timeline;

pub use error::{Error, Result};
