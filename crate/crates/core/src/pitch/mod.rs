//! Fundamental frequency estimation with probabilistic YIN.
//!
//! Each frame yields a cumulative mean normalized difference curve
//! ([`yin::cmnd`]); a Beta prior over YIN thresholds turns its troughs into
//! weighted period candidates ([`candidates::frame_candidates`]); an HMM over
//! pitch bins and voicing picks one path through them ([`hmm::viterbi_track`]).
//!
//! Defaults: frames of 93 ms (rounded to 4096 samples at 44.1 kHz), hop of a
//! quarter frame, difference window of half a frame, search band
//! 65.41–2093 Hz.

pub mod candidates;
pub mod hmm;
pub mod yin;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;

pub use candidates::{frame_candidates, Candidate, FrameCandidates, ThresholdPrior};
pub use hmm::viterbi_track;
pub use yin::{cmnd, Cmnd};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PitchError {
    #[error("frame of {samples} samples is too short; need at least {required}")]
    WindowTooShort { samples: usize, required: usize },
    #[error("invalid pitch configuration: {0}")]
    InvalidConfig(String),
}

/// How the frame length in milliseconds becomes a sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameRounding {
    /// `round(ms · sr / 1000)`.
    Exact,
    /// The power of two nearest to the exact count on a log scale.
    NearestPowerOfTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub fmin: f64,
    pub fmax: f64,
    pub frame_length_ms: f64,
    pub frame_rounding: FrameRounding,
    /// Frame length / hop length.
    pub hop_divisor: usize,
    /// Frame length / difference-window length.
    pub window_divisor: usize,
    pub n_thresholds: usize,
    pub beta_a: f64,
    pub beta_b: f64,
    pub voicing_switch_prob: f64,
    pub bins_per_semitone: usize,
    pub max_transition_octaves_per_sec: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            fmin: 65.41,
            fmax: 2093.0,
            frame_length_ms: 93.0,
            frame_rounding: FrameRounding::NearestPowerOfTwo,
            hop_divisor: 4,
            window_divisor: 2,
            n_thresholds: 100,
            beta_a: 2.0,
            beta_b: 18.0,
            voicing_switch_prob: 0.01,
            bins_per_semitone: 20,
            max_transition_octaves_per_sec: 35.92,
        }
    }
}

/// Sample-domain quantities derived from a [`PitchConfig`] at one sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchGeometry {
    pub sample_rate: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub frame_length: usize,
    pub hop_length: usize,
    pub win_length: usize,
    /// `floor(sr / fmax)`.
    pub min_lag: usize,
    /// `ceil(sr / fmin)`.
    pub max_lag: usize,
}

impl PitchConfig {
    pub fn frame_length(&self, sample_rate: u32) -> usize {
        let exact = (self.frame_length_ms * sample_rate as f64 / 1000.0).round().max(1.0);
        match self.frame_rounding {
            FrameRounding::Exact => exact as usize,
            FrameRounding::NearestPowerOfTwo => exact.log2().round().exp2() as usize,
        }
    }

    pub fn geometry(&self, sample_rate: u32) -> Result<PitchGeometry, PitchError> {
        let bad = |m: String| Err(PitchError::InvalidConfig(m));
        let sr = sample_rate as f64;
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax < sr / 2.0) {
            return bad(format!(
                "need 0 < fmin < fmax < sample_rate/2 (fmin {}, fmax {}, sr {sample_rate})",
                self.fmin, self.fmax
            ));
        }
        if self.hop_divisor == 0 || self.window_divisor == 0 {
            return bad("hop and window divisors must be positive".into());
        }
        if !(self.voicing_switch_prob > 0.0 && self.voicing_switch_prob < 1.0) {
            return bad("voicing_switch_prob must lie in (0, 1)".into());
        }
        let frame_length = self.frame_length(sample_rate);
        let hop_length = (frame_length / self.hop_divisor).max(1);
        let win_length = (frame_length / self.window_divisor).max(1);
        let min_lag = ((sr / self.fmax).floor() as usize).max(1);
        let max_lag = (sr / self.fmin).ceil() as usize;
        // The trough test at max_lag reads d' one lag further.
        if win_length + max_lag + 1 > frame_length {
            return bad(format!(
                "frame of {frame_length} samples cannot hold a {win_length}-sample window at lag {max_lag}; raise the frame length or fmin"
            ));
        }
        Ok(PitchGeometry {
            sample_rate: sr,
            fmin: self.fmin,
            fmax: self.fmax,
            frame_length,
            hop_length,
            win_length,
            min_lag,
            max_lag,
        })
    }

    pub fn threshold_prior(&self) -> Result<ThresholdPrior, PitchError> {
        ThresholdPrior::beta(self.beta_a, self.beta_b, self.n_thresholds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame {
    /// Center of the analysis frame.
    pub time_ms: f64,
    pub f0_hz: Option<f64>,
    pub voiced_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub frames: Vec<PitchFrame>,
    /// Mean f0 over voiced frames; absent when no frame is voiced.
    pub summary_f0_hz: Option<f64>,
}

impl PitchTrack {
    pub fn from_frames(frames: Vec<PitchFrame>) -> Self {
        let voiced: Vec<f64> = frames.iter().filter_map(|f| f.f0_hz).collect();
        let summary_f0_hz = (!voiced.is_empty()).then(|| voiced.iter().sum::<f64>() / voiced.len() as f64);
        Self { frames, summary_f0_hz }
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().filter(|f| f.f0_hz.is_some()).count() as f64 / self.frames.len() as f64
    }
}

/// Frame-level pitch track of a whole buffer. Frames lie fully inside the
/// buffer; a buffer shorter than one frame gives an empty track.
pub fn track_pitch(buffer: &AudioBuffer, config: &PitchConfig) -> Result<PitchTrack, PitchError> {
    let geometry = config.geometry(buffer.sample_rate())?;
    let prior = config.threshold_prior()?;
    let samples: Vec<f64> = buffer.samples().iter().map(|&s| s as f64).collect();
    if samples.len() < geometry.frame_length {
        return Ok(PitchTrack::from_frames(Vec::new()));
    }
    let kernel = yin::YinKernel::new(geometry.win_length, geometry.max_lag + 1);
    let n_frames = (samples.len() - geometry.frame_length) / geometry.hop_length + 1;
    let mut candidates = Vec::with_capacity(n_frames);
    let mut times = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let start = k * geometry.hop_length;
        let frame = &samples[start..start + geometry.frame_length];
        let curve = kernel.cmnd(frame)?;
        candidates.push(if curve.degenerate {
            FrameCandidates {
                candidates: Vec::new(),
                no_candidate_mass: prior.total_mass(),
            }
        } else {
            frame_candidates(&curve.values, &geometry, &prior)
        });
        times.push((start as f64 + geometry.frame_length as f64 / 2.0) * 1000.0 / geometry.sample_rate);
    }
    Ok(viterbi_track(&candidates, &times, config, &geometry))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Estimate {
    pub summary_f0_hz: f64,
    pub voiced_fraction: f64,
    pub track: PitchTrack,
}

/// Segment-level f0, or `None` when the segment is shorter than one frame or
/// has no voiced frame.
pub fn estimate_segment_f0(segment: &AudioBuffer, config: &PitchConfig) -> Result<Option<F0Estimate>, PitchError> {
    let track = track_pitch(segment, config)?;
    Ok(track.summary_f0_hz.map(|summary_f0_hz| F0Estimate {
        summary_f0_hz,
        voiced_fraction: track.voiced_fraction(),
        track,
    }))
}

/// One row of the batch f0 table. `summary_f0_hz` is written as an empty
/// field when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Row {
    pub segment_id: String,
    pub summary_f0_hz: Option<f64>,
    pub voiced_fraction: f64,
    pub n_frames: usize,
}

impl F0Row {
    pub fn from_track(segment_id: impl Into<String>, track: &PitchTrack) -> Self {
        Self {
            segment_id: segment_id.into(),
            summary_f0_hz: track.summary_f0_hz,
            voiced_fraction: track.voiced_fraction(),
            n_frames: track.frames.len(),
        }
    }
}

pub fn write_f0_csv<W: Write>(out: W, rows: &[F0Row]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f0_csv<R: Read>(input: R) -> Result<Vec<F0Row>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_at_44k1() {
        let g = PitchConfig::default().geometry(44_100).unwrap();
        assert_eq!(g.frame_length, 4096);
        assert_eq!(g.hop_length, 1024);
        assert_eq!(g.win_length, 2048);
        assert_eq!(g.min_lag, 21);
        assert_eq!(g.max_lag, 675);
        let exact = PitchConfig { frame_rounding: FrameRounding::Exact, ..Default::default() };
        assert_eq!(exact.frame_length(44_100), 4101);
    }

    #[test]
    fn invalid_band_is_rejected() {
        assert!(PitchConfig::default().geometry(4_000).is_err());
        let cfg = PitchConfig { fmin: 10.0, ..Default::default() };
        assert!(matches!(cfg.geometry(44_100), Err(PitchError::InvalidConfig(_))));
    }

    #[test]
    fn short_segment_has_no_estimate() {
        let buf = AudioBuffer::new(vec![0.1; 2000], 44_100).unwrap();
        assert_eq!(estimate_segment_f0(&buf, &PitchConfig::default()).unwrap(), None);
    }

    #[test]
    fn f0_csv_leaves_absent_values_empty() {
        let rows = vec![
            F0Row { segment_id: "a".into(), summary_f0_hz: Some(371.5), voiced_fraction: 0.5, n_frames: 4 },
            F0Row { segment_id: "b".into(), summary_f0_hz: None, voiced_fraction: 0.0, n_frames: 0 },
        ];
        let mut out = Vec::new();
        write_f0_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text, "segment_id,summary_f0_hz,voiced_fraction,n_frames\na,371.5,0.5,4\nb,,0.0,0\n");
        assert_eq!(read_f0_csv(out.as_slice()).unwrap(), rows);
    }
}
