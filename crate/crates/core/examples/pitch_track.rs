//! Frame-level f0 of a gliding tone.
//!
//!     cargo run -p vocalcode --example pitch_track [file.wav]

use std::f64::consts::TAU;

use vocalcode::audio_io::load_wav;
use vocalcode::pitch::{track_pitch, PitchConfig};
use vocalcode::AudioBuffer;

fn glide() -> AudioBuffer {
    let sr = 44_100.0;
    let mut phase = 0.0;
    let samples = (0..(sr * 1.5) as usize)
        .map(|i| {
            // 250 Hz rising to 500 Hz, like a squeal.
            let f = 250.0 * 2f64.powf(i as f64 / (sr * 1.5));
            phase += TAU * f / sr;
            (0.3 * phase.sin()) as f32
        })
        .collect();
    AudioBuffer::new(samples, sr as u32).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let buffer = match std::env::args().nth(1) {
        Some(path) => load_wav(path)?,
        None => glide(),
    };
    let track = track_pitch(&buffer, &PitchConfig::default())?;
    for f in &track.frames {
        match f.f0_hz {
            Some(hz) => println!("{:8.1} ms  {hz:7.1} Hz  p(voiced) {:.2}", f.time_ms, f.voiced_probability),
            None => println!("{:8.1} ms        -", f.time_ms),
        }
    }
    match track.summary_f0_hz {
        Some(hz) => println!("mean f0 {hz:.1} Hz over {:.0}% voiced frames", 100.0 * track.voiced_fraction()),
        None => println!("no voiced frames"),
    }
    Ok(())
}
