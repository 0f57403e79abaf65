//! Splits a recording into non-silent segments and prints the manifest.
//!
//!     cargo run -p vocalcode --example segment_recording [file.wav]
//!
//! Without an argument a synthetic two-burst recording is used.

use std::f64::consts::TAU;

use vocalcode::audio_io::{load_wav, write_wav};
use vocalcode::manifest::write_jsonl;
use vocalcode::segmenter::{segment_audio, SegmenterConfig};
use vocalcode::AudioBuffer;

fn synthetic() -> AudioBuffer {
    let sr = 16_000;
    let samples = (0..sr * 2)
        .map(|i| {
            let t = i as f64 / sr as f64;
            // A faint hiss with two 300 Hz bursts on top.
            let hiss = 2e-4 * ((i * 7919 % 1000) as f64 / 500.0 - 1.0);
            let burst = if (0.2..0.6).contains(&t) || (1.0..1.7).contains(&t) { 0.4 * (TAU * 300.0 * t).sin() } else { 0.0 };
            (hiss + burst) as f32
        })
        .collect();
    AudioBuffer::new(samples, sr as u32).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (buffer, source) = match std::env::args().nth(1) {
        Some(path) => {
            let stem = std::path::Path::new(&path).file_stem().unwrap().to_string_lossy().into_owned();
            (load_wav(&path)?, stem)
        }
        None => {
            let buffer = synthetic();
            let path = std::env::temp_dir().join("vocalcode_synthetic.wav");
            write_wav(&buffer, &path)?;
            eprintln!("wrote synthetic input to {}", path.display());
            (load_wav(&path)?, "synthetic".to_string())
        }
    };
    let segments = segment_audio(&buffer, &source, &SegmenterConfig::default())?;
    eprintln!("{:.0} ms of audio, {} segments", buffer.duration_ms(), segments.len());
    write_jsonl(std::io::stdout().lock(), &segments)?;
    Ok(())
}
