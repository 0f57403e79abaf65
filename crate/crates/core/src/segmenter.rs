//! Level-threshold pre-segmentation.
//!
//! Frames whose level falls below `threshold_db` are silent. Silent runs longer
//! than `min_pause_ms` (and any silent run touching either end of the
//! recording) are pauses; everything between two pauses is one segment.
//! Shorter silent runs stay inside the surrounding segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum SegmenterError {
    #[error("buffer of {samples} samples is shorter than one analysis frame ({frame} samples)")]
    BufferTooShort { samples: usize, frame: usize },
    #[error("invalid segmenter configuration: {0}")]
    InvalidConfig(String),
}

/// Reference RMS that 0 dB corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelReference {
    /// Smallest positive frame RMS in the recording, clamped below at `1e-6`.
    NoiseFloor,
    /// A fixed RMS value.
    Fixed(f64),
}

pub const MIN_FLOOR_RMS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub threshold_db: f64,
    pub min_pause_ms: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub reference: LevelReference,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            threshold_db: 25.0,
            min_pause_ms: 100.0,
            frame_ms: 20.0,
            hop_ms: 10.0,
            reference: LevelReference::NoiseFloor,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmenterError> {
        let bad = |m: &str| Err(SegmenterError::InvalidConfig(m.into()));
        if !(self.min_pause_ms > 0.0) {
            return bad("min_pause_ms must be positive");
        }
        if !(self.hop_ms > 0.0) {
            return bad("hop_ms must be positive");
        }
        if !(self.frame_ms >= self.hop_ms) {
            return bad("frame_ms must be at least hop_ms");
        }
        if let LevelReference::Fixed(r) = self.reference {
            if !(r > 0.0) {
                return bad("fixed reference RMS must be positive");
            }
        }
        Ok(())
    }

    fn frame_and_hop(&self, sample_rate: u32) -> (usize, usize) {
        let sr = sample_rate as f64;
        let hop = ((self.hop_ms * sr / 1000.0).round() as usize).max(1);
        let frame = ((self.frame_ms * sr / 1000.0).round() as usize).max(hop);
        (frame, hop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLevel {
    pub start_ms: f64,
    pub level_db: f64,
}

/// A non-silent interval of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub source: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Segment {
    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

/// Level of each hop-spaced frame in dB relative to the configured reference.
pub fn frame_levels(
    buffer: &AudioBuffer,
    config: &SegmenterConfig,
) -> Result<Vec<FrameLevel>, SegmenterError> {
    config.validate()?;
    let (frame, hop) = config.frame_and_hop(buffer.sample_rate());
    let samples = buffer.samples();
    if samples.len() < frame {
        return Err(SegmenterError::BufferTooShort {
            samples: samples.len(),
            frame,
        });
    }
    let n_frames = (samples.len() - frame) / hop + 1;
    let rms: Vec<f64> = (0..n_frames)
        .map(|k| {
            let w = &samples[k * hop..k * hop + frame];
            (w.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / frame as f64).sqrt()
        })
        .collect();
    let floor = match config.reference {
        LevelReference::Fixed(r) => r,
        LevelReference::NoiseFloor => rms
            .iter()
            .copied()
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min)
            .max(MIN_FLOOR_RMS),
    };
    let ms_per_sample = 1000.0 / buffer.sample_rate() as f64;
    Ok(rms
        .iter()
        .enumerate()
        .map(|(k, &r)| FrameLevel {
            start_ms: (k * hop) as f64 * ms_per_sample,
            level_db: if r > 0.0 { 20.0 * (r / floor).log10() } else { 0.0 },
        })
        .collect())
}

/// Splits a recording into non-silent segments. Segment ids are `"{source}_{index:05}"`.
///
/// Frame `k` owns the hop cell starting at `k·hop`; the last cell extends to the
/// end of the buffer. Boundaries therefore lie on the hop grid, at or before
/// the onset of audible content.
pub fn segment_audio(
    buffer: &AudioBuffer,
    source: &str,
    config: &SegmenterConfig,
) -> Result<Vec<Segment>, SegmenterError> {
    let levels = frame_levels(buffer, config)?;
    let silent: Vec<bool> = levels.iter().map(|l| l.level_db < config.threshold_db).collect();
    let cells: Vec<(f64, f64)> = levels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let end = levels.get(k + 1).map_or(buffer.duration_ms(), |n| n.start_ms);
            (l.start_ms, end)
        })
        .collect();

    // Mark pauses: silent runs that are long enough or touch an edge.
    let n = silent.len();
    let mut pause = vec![false; n];
    let mut k = 0;
    while k < n {
        if !silent[k] {
            k += 1;
            continue;
        }
        let run_start = k;
        while k < n && silent[k] {
            k += 1;
        }
        let run_ms = cells[k - 1].1 - cells[run_start].0;
        if run_start == 0 || k == n || run_ms > config.min_pause_ms {
            pause[run_start..k].iter_mut().for_each(|p| *p = true);
        }
    }

    let mut segments = Vec::new();
    let mut k = 0;
    while k < n {
        if pause[k] {
            k += 1;
            continue;
        }
        let first = k;
        while k < n && !pause[k] {
            k += 1;
        }
        segments.push(Segment {
            id: format!("{source}_{:05}", segments.len()),
            source: source.to_string(),
            start_ms: cells[first].0,
            end_ms: cells[k - 1].1,
        });
    }
    Ok(segments)
}
