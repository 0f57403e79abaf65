//! Viterbi decoding over log-spaced pitch bins with a voiced/unvoiced layer.
//!
//! There are `n` pitch bins; state `b` is "voiced at bin b" and state `n + b`
//! is "unvoiced, last near bin b". Within each layer a triangular kernel
//! limits how far the pitch can move between frames; moving between layers
//! costs the voicing switch probability.

use super::candidates::FrameCandidates;
use super::{PitchConfig, PitchFrame, PitchGeometry, PitchTrack};

pub(crate) struct PitchHmm {
    fmin: f64,
    bins_per_octave: f64,
    n_bins: usize,
    half_width: usize,
    log_kernel: Vec<f64>,
    log_row_norm: Vec<f64>,
    log_stay: f64,
    log_switch: f64,
}

impl PitchHmm {
    pub(crate) fn new(config: &PitchConfig, geometry: &PitchGeometry) -> Self {
        let bins_per_semitone = config.bins_per_semitone.max(1);
        let bins_per_octave = 12.0 * bins_per_semitone as f64;
        let n_bins = (bins_per_octave * (config.fmax / config.fmin).log2()).floor() as usize + 1;
        let semitones_per_frame = (config.max_transition_octaves_per_sec * 12.0 * geometry.hop_length as f64
            / geometry.sample_rate)
            .round() as usize;
        // Kernel of total width semitones·bins + 1, i.e. h bins either side,
        // with triangular weight 1 − |d|/(h+1).
        let half_width = semitones_per_frame * bins_per_semitone / 2;
        let log_kernel: Vec<f64> = (0..=half_width)
            .map(|d| (1.0 - d as f64 / (half_width as f64 + 1.0)).ln())
            .collect();
        let log_row_norm = (0..n_bins)
            .map(|i| {
                let lo = i.saturating_sub(half_width);
                let hi = (i + half_width).min(n_bins - 1);
                (lo..=hi)
                    .map(|j| log_kernel[i.abs_diff(j)].exp())
                    .sum::<f64>()
                    .ln()
            })
            .collect();
        let p = config.voicing_switch_prob;
        Self {
            fmin: config.fmin,
            bins_per_octave,
            n_bins,
            half_width,
            log_kernel,
            log_row_norm,
            log_stay: (1.0 - p).ln(),
            log_switch: p.ln(),
        }
    }

    pub(crate) fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub(crate) fn bin_of(&self, f0: f64) -> usize {
        let b = (self.bins_per_octave * (f0 / self.fmin).log2()).round();
        (b.max(0.0) as usize).min(self.n_bins - 1)
    }

    pub(crate) fn bin_center(&self, bin: usize) -> f64 {
        self.fmin * (bin as f64 / self.bins_per_octave).exp2()
    }

    fn log_observations(&self, frame: &FrameCandidates) -> Vec<f64> {
        let n = self.n_bins;
        let mut obs = vec![0.0; 2 * n];
        for c in &frame.candidates {
            obs[self.bin_of(c.f0_hz)] += c.probability;
        }
        let voiced = frame.voiced_mass().clamp(0.0, 1.0);
        let unvoiced = (1.0 - voiced).max(1e-12) / n as f64;
        for (b, o) in obs.iter_mut().enumerate() {
            *o = if b < n { o.ln() } else { unvoiced.ln() };
        }
        obs
    }

    /// Most likely state sequence.
    pub(crate) fn decode(&self, frames: &[FrameCandidates]) -> Vec<usize> {
        let n = self.n_bins;
        let states = 2 * n;
        if frames.is_empty() {
            return Vec::new();
        }
        let log_init = -(states as f64).ln();
        let mut delta: Vec<f64> = self
            .log_observations(&frames[0])
            .into_iter()
            .map(|o| o + log_init)
            .collect();
        let mut back: Vec<Vec<u32>> = Vec::with_capacity(frames.len());
        back.push(Vec::new());
        let mut next = vec![f64::NEG_INFINITY; states];

        for frame in &frames[1..] {
            let obs = self.log_observations(frame);
            let mut pointers = vec![0u32; states];
            for j in 0..states {
                let (layer, bin) = (j / n, j % n);
                let lo = bin.saturating_sub(self.half_width);
                let hi = (bin + self.half_width).min(n - 1);
                let mut best = f64::NEG_INFINITY;
                let mut arg = j;
                for i_bin in lo..=hi {
                    let move_cost = self.log_kernel[i_bin.abs_diff(bin)] - self.log_row_norm[i_bin];
                    for from_layer in 0..2 {
                        let i = from_layer * n + i_bin;
                        let layer_cost = if from_layer == layer { self.log_stay } else { self.log_switch };
                        let score = delta[i] + move_cost + layer_cost;
                        if score > best {
                            best = score;
                            arg = i;
                        }
                    }
                }
                next[j] = best + obs[j];
                pointers[j] = arg as u32;
            }
            std::mem::swap(&mut delta, &mut next);
            back.push(pointers);
        }

        let mut state = delta
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0;
        let mut path = vec![0; frames.len()];
        for t in (0..frames.len()).rev() {
            path[t] = state;
            if t > 0 {
                state = back[t][state] as usize;
            }
        }
        path
    }
}

/// Decodes the best voiced/unvoiced pitch path through per-frame candidates.
///
/// A voiced frame reports the refined frequency of the strongest candidate in
/// the decoded bin. `times_ms` gives each frame's center time.
pub fn viterbi_track(
    frames: &[FrameCandidates],
    times_ms: &[f64],
    config: &PitchConfig,
    geometry: &PitchGeometry,
) -> PitchTrack {
    let hmm = PitchHmm::new(config, geometry);
    let n = hmm.n_bins();
    let path = hmm.decode(frames);
    let out: Vec<PitchFrame> = frames
        .iter()
        .zip(&path)
        .enumerate()
        .map(|(t, (frame, &state))| {
            let f0_hz = (state < n)
                .then(|| {
                    frame
                        .candidates
                        .iter()
                        .filter(|c| hmm.bin_of(c.f0_hz) == state)
                        .max_by(|a, b| a.probability.total_cmp(&b.probability))
                        .map(|c| c.f0_hz)
                        .unwrap_or_else(|| hmm.bin_center(state))
                })
                .map(|f| f.clamp(config.fmin, config.fmax));
            PitchFrame {
                time_ms: times_ms.get(t).copied().unwrap_or(f64::NAN),
                f0_hz,
                voiced_probability: frame.voiced_mass().clamp(0.0, 1.0),
            }
        })
        .collect();
    PitchTrack::from_frames(out)
}
