//! Signal fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocalcode::AudioBuffer;

pub const SR: u32 = 44_100;

pub fn sine(freq: f64, amplitude: f64, seconds: f64) -> Vec<f32> {
    let n = (seconds * SR as f64).round() as usize;
    (0..n)
        .map(|i| (amplitude * (TAU * freq * i as f64 / SR as f64).sin()) as f32)
        .collect()
}

pub fn buffer(samples: Vec<f32>) -> AudioBuffer {
    AudioBuffer::new(samples, SR).unwrap()
}

/// Uniform noise of the given peak amplitude.
pub fn noise(n: usize, amplitude: f64, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (amplitude * rng.random_range(-1.0..1.0)) as f32).collect()
}

/// Tone bursts over a quiet noise bed. `layout` lists (start_ms, end_ms) of
/// each 440 Hz tone; the buffer runs to `total_ms`.
pub fn tone_pattern(layout: &[(f64, f64)], total_ms: f64, seed: u64) -> AudioBuffer {
    let ms = |t: f64| (t * SR as f64 / 1000.0).round() as usize;
    let mut samples = noise(ms(total_ms), 1e-4, seed);
    for &(start, end) in layout {
        for i in ms(start)..ms(end) {
            samples[i] += (0.5 * (TAU * 440.0 * i as f64 / SR as f64).sin()) as f32;
        }
    }
    buffer(samples)
}
