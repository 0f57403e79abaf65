//! Tooling for coding infant vocalization recordings.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`segmenter`] splits a recording into non-silent segments separated by pauses.
//! 2. [`scheme`] defines the five Layer-1 classes and the coding workflow rules
//!    (randomized queues with hidden duplicates, a three-play budget, the
//!    consolidation gate and consensus filtering). [`log`] persists the workflow
//!    as an append-only JSON Lines log.
//! 3. [`reliability`] cross-tabulates two coders and computes Cohen's kappa.
//! 4. [`pitch`] (probabilistic YIN) and [`analytics`] describe the consensually
//!    labeled vocalizations and compare groups.
//!
//! [`audio_io`] provides the shared sample representation.

pub mod analytics;
pub mod audio_io;
pub mod log;
pub mod manifest;
pub mod pitch;
pub mod reliability;
pub mod rng;
pub mod scheme;
pub mod segmenter;

pub use audio_io::{AudioBuffer, AudioError};
pub use scheme::{AnnotationClass, AnnotationRecord, Phase};
pub use segmenter::{Segment, SegmenterConfig};
