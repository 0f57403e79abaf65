//! Per-frame period candidates from a distribution over YIN thresholds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::{PitchError, PitchGeometry};
use super::yin::parabolic_shift;

/// Discrete prior over absolute YIN thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPrior {
    pub thresholds: Vec<f64>,
    pub masses: Vec<f64>,
}

impl ThresholdPrior {
    /// Beta(`a`, `b`) discretized on `n` thresholds `k/n`, `k = 1..=n`; each
    /// threshold carries the probability of `((k-1)/n, k/n]`.
    pub fn beta(a: f64, b: f64, n: usize) -> Result<Self, PitchError> {
        let dist = Beta::new(a, b).map_err(|e| PitchError::InvalidConfig(format!("beta prior: {e}")))?;
        if n == 0 {
            return Err(PitchError::InvalidConfig("threshold grid is empty".into()));
        }
        let cdf = |k: usize| dist.cdf(k as f64 / n as f64);
        Ok(Self {
            thresholds: (1..=n).map(|k| k as f64 / n as f64).collect(),
            masses: (1..=n).map(|k| cdf(k) - cdf(k - 1)).collect(),
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Integer lag of the trough.
    pub lag: usize,
    /// Frequency from the parabolically refined lag, clamped to `[fmin, fmax]`.
    pub f0_hz: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameCandidates {
    pub candidates: Vec<Candidate>,
    /// Prior mass of thresholds below which no trough falls.
    pub no_candidate_mass: f64,
}

impl FrameCandidates {
    pub fn voiced_mass(&self) -> f64 {
        self.candidates.iter().map(|c| c.probability).sum()
    }
}

/// Local minima of `d'` with lag in `[min_lag, max_lag]`.
pub(crate) fn troughs(values: &[f64], min_lag: usize, max_lag: usize) -> Vec<usize> {
    let lo = min_lag.max(1);
    let hi = max_lag.min(values.len().saturating_sub(2));
    (lo..=hi)
        .filter(|&t| values[t] < values[t - 1] && values[t] <= values[t + 1])
        .collect()
}

/// For every threshold `s` of the prior, the first trough with `d' < s`
/// receives that threshold's mass.
pub fn frame_candidates(cmnd_values: &[f64], geometry: &PitchGeometry, prior: &ThresholdPrior) -> FrameCandidates {
    let troughs = troughs(cmnd_values, geometry.min_lag, geometry.max_lag);
    let mut mass = vec![0.0; troughs.len()];
    let mut no_candidate_mass = 0.0;
    for (&s, &m) in prior.thresholds.iter().zip(&prior.masses) {
        match troughs.iter().position(|&t| cmnd_values[t] < s) {
            Some(i) => mass[i] += m,
            None => no_candidate_mass += m,
        }
    }
    let candidates = troughs
        .iter()
        .zip(&mass)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&lag, &probability)| {
            let refined = lag as f64 + parabolic_shift(cmnd_values, lag);
            Candidate {
                lag,
                f0_hz: (geometry.sample_rate / refined).clamp(geometry.fmin, geometry.fmax),
                probability,
            }
        })
        .collect();
    FrameCandidates {
        candidates,
        no_candidate_mass,
    }
}
