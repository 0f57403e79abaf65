//! YIN difference function and its cumulative mean normalization.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::PitchError;

/// Cumulative mean normalized difference `d'(τ)` for `τ = 0..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmnd {
    pub values: Vec<f64>,
    /// The difference function vanished everywhere (e.g. an all-zero frame).
    /// Values are then all 1 and no period can be read from them.
    pub degenerate: bool,
}

/// Computes `d(τ) = Σ_{t<W} (x_t − x_{t+τ})²` over the first `win_length`
/// samples and normalizes it: `d'(0) = 1`, `d'(τ) = d(τ)·τ / Σ_{j=1..τ} d(j)`.
///
/// The frame must hold at least `win_length + max_lag` samples.
pub fn cmnd(frame: &[f64], win_length: usize, max_lag: usize) -> Result<Cmnd, PitchError> {
    YinKernel::new(win_length, max_lag).cmnd(frame)
}

/// Reusable FFT plans for computing [`cmnd`] on many equally sized frames.
pub(crate) struct YinKernel {
    win_length: usize,
    max_lag: usize,
    n_fft: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl YinKernel {
    pub(crate) fn new(win_length: usize, max_lag: usize) -> Self {
        // Circular correlation of size >= W + max_lag never wraps for the lags we read.
        let n_fft = (win_length + max_lag).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        Self {
            win_length,
            max_lag,
            n_fft,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub(crate) fn cmnd(&self, frame: &[f64]) -> Result<Cmnd, PitchError> {
        let (w, max_lag) = (self.win_length, self.max_lag);
        if w == 0 || max_lag == 0 || frame.len() < w + max_lag {
            return Err(PitchError::WindowTooShort {
                samples: frame.len(),
                required: w.max(1) + max_lag.max(1),
            });
        }
        let span = &frame[..w + max_lag];

        let mut head: Vec<Complex<f64>> = vec![Complex::default(); self.n_fft];
        let mut full: Vec<Complex<f64>> = vec![Complex::default(); self.n_fft];
        for (dst, &x) in head.iter_mut().zip(&span[..w]) {
            dst.re = x;
        }
        for (dst, &x) in full.iter_mut().zip(span) {
            dst.re = x;
        }
        self.forward.process(&mut head);
        self.forward.process(&mut full);
        for (h, f) in head.iter_mut().zip(&full) {
            *h = h.conj() * f;
        }
        self.inverse.process(&mut head);
        let scale = 1.0 / self.n_fft as f64;

        // Energy of span[τ..τ+W) via prefix sums of squares.
        let mut prefix = Vec::with_capacity(span.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &x in span {
            acc += x * x;
            prefix.push(acc);
        }
        let energy = |tau: usize| prefix[tau + w] - prefix[tau];
        let e0 = energy(0);

        let mut diff = vec![0.0; max_lag + 1];
        for (tau, d) in diff.iter_mut().enumerate().skip(1) {
            let acf = head[tau].re * scale;
            *d = (e0 + energy(tau) - 2.0 * acf).max(0.0);
        }
        Ok(normalize(&diff))
    }
}

/// Cumulative mean normalization of a difference function.
pub(crate) fn normalize(diff: &[f64]) -> Cmnd {
    let mut values = vec![1.0; diff.len()];
    let mut running = 0.0;
    let mut any_energy = false;
    for tau in 1..diff.len() {
        running += diff[tau];
        if running > 0.0 {
            any_energy = true;
            values[tau] = diff[tau] * tau as f64 / running;
        }
    }
    Cmnd {
        values,
        degenerate: !any_energy,
    }
}

/// Sub-sample offset of the vertex of the parabola through `(τ-1, τ, τ+1)`.
pub(crate) fn parabolic_shift(values: &[f64], tau: usize) -> f64 {
    if tau == 0 || tau + 1 >= values.len() {
        return 0.0;
    }
    let (a, b, c) = (values[tau - 1], values[tau], values[tau + 1]);
    let denom = a - 2.0 * b + c;
    if denom <= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(W·L) evaluation, independent of the FFT path.
    fn brute_force(frame: &[f64], w: usize, max_lag: usize) -> Vec<f64> {
        let diff: Vec<f64> = (0..=max_lag)
            .map(|tau| (0..w).map(|t| (frame[t] - frame[t + tau]).powi(2)).sum())
            .collect();
        let mut out = vec![1.0; max_lag + 1];
        let mut running = 0.0;
        for tau in 1..=max_lag {
            running += diff[tau];
            out[tau] = diff[tau] * tau as f64 / running;
        }
        out
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::PortableRng::new(seed);
        (0..n).map(|_| (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0).collect()
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let frame: Vec<f64> = noise(300, 1)
            .iter()
            .enumerate()
            .map(|(i, n)| 0.3 * n + (i as f64 * 0.21).sin())
            .collect();
        let fast = cmnd(&frame, 150, 120).unwrap();
        let slow = brute_force(&frame, 150, 120);
        assert!(!fast.degenerate);
        for (a, b) in fast.values.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn first_value_is_one() {
        let c = cmnd(&noise(64, 2), 32, 16).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert_eq!(c.values.len(), 17);
    }

    #[test]
    fn integer_period_sine_dips_at_period() {
        let period = 40;
        let frame: Vec<f64> = (0..400)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period as f64).sin())
            .collect();
        let c = cmnd(&frame, 200, 100).unwrap();
        assert!(c.values[period] < 0.01, "{}", c.values[period]);
        assert!(c.values[period / 2] > 1.0);
    }

    #[test]
    fn zero_frame_is_degenerate() {
        let c = cmnd(&[0.0; 128], 64, 32).unwrap();
        assert!(c.degenerate);
        assert!(c.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn short_window_is_an_error() {
        assert!(matches!(
            cmnd(&[0.0; 100], 64, 50),
            Err(PitchError::WindowTooShort { samples: 100, required: 114 })
        ));
    }

    #[test]
    fn parabola_vertex() {
        // Samples of (x - 10.3)^2 at 9, 10, 11.
        let f = |x: f64| (x - 10.3).powi(2);
        let v: Vec<f64> = (0..12).map(|i| f(i as f64)).collect();
        assert!((parabolic_shift(&v, 10) - 0.3).abs() < 1e-12);
        assert_eq!(parabolic_shift(&v, 0), 0.0);
    }
}
