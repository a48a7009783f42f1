//! File formats, annotation post-processing, beat extraction and evaluation
//! metrics for co-speech gesture data.
//!
//! - [`motion`]: BVH motion, facial blendshapes, WAV audio and word alignments.
//! - [`annotation`]: frame-level semantic scores, annotator agreement, statistics.
//! - [`beatsig`]: audio onsets and motion velocity minima as beat sequences.
//! - [`metrics`]: SRGR, L1 diversity, FGD and BeatAlign.

pub mod motion;

pub mod annotation;
pub mod beatsig;
pub mod metrics;
