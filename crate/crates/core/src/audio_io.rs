//! WAV decoding and encoding into a normalized mono sample buffer.

use std::io::{Cursor, Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read audio file: {0}")]
    Unreadable(String),
    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),
    #[error("audio payload is empty")]
    EmptyPayload,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f32 },
    #[error("slice range {start_ms} ms .. {end_ms} ms is invalid for a buffer of {duration_ms} ms")]
    RangeOutOfBounds {
        start_ms: f64,
        end_ms: f64,
        duration_ms: f64,
    },
    #[error("cannot write audio: {0}")]
    Write(String),
}

/// Mono PCM samples normalized to full scale `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.sample_rate as f64
    }

    /// Sample index at `ms`, rounded down.
    ///
    /// A small tolerance absorbs the float error of times that were themselves
    /// derived from sample indices.
    pub fn index_at_ms(&self, ms: f64) -> usize {
        let exact = ms * self.sample_rate as f64 / 1000.0;
        (exact + 1e-6).floor().max(0.0) as usize
    }
}

/// Decodes a RIFF/WAVE file and downmixes it to mono by averaging channels.
///
/// Integer PCM of `b` bits is scaled by `2^(b-1)`, so the most negative code
/// maps exactly to `-1.0`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| classify(e, path))?;
    decode(reader).map_err(|e| match e {
        AudioError::Unreadable(msg) => AudioError::Unreadable(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Same as [`load_wav`] for an in-memory WAV image.
pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| classify(e, Path::new("<memory>")))?;
    decode(reader)
}

fn classify(err: hound::Error, path: &Path) -> AudioError {
    match err {
        hound::Error::Unsupported => AudioError::UnsupportedCodec("unsupported WAV encoding".into()),
        hound::Error::FormatError(msg) if msg.contains("format tag") || msg.contains("bits") => {
            AudioError::UnsupportedCodec(msg.to_string())
        }
        other => AudioError::Unreadable(format!("{}: {other}", path.display())),
    }
}

fn decode<R: Read>(reader: WavReader<R>) -> Result<AudioBuffer, AudioError> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::UnsupportedCodec("zero channels".into()));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| (v as f64 / scale) as f32))
                .collect::<Result<_, _>>()
                .map_err(|e| AudioError::Unreadable(e.to_string()))?
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v.clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(|e| AudioError::Unreadable(e.to_string()))?,
        (format, bits) => {
            return Err(AudioError::UnsupportedCodec(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(AudioError::EmptyPayload);
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / channels as f64) as f32)
            .collect()
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Samples `floor(start_ms·sr/1000) .. floor(end_ms·sr/1000)` at the same rate.
pub fn slice(buffer: &AudioBuffer, start_ms: f64, end_ms: f64) -> Result<AudioBuffer, AudioError> {
    let duration_ms = buffer.duration_ms();
    let out_of_bounds = || AudioError::RangeOutOfBounds {
        start_ms,
        end_ms,
        duration_ms,
    };
    if !(start_ms >= 0.0 && start_ms < end_ms) {
        return Err(out_of_bounds());
    }
    let start = buffer.index_at_ms(start_ms);
    let end = buffer.index_at_ms(end_ms);
    if end > buffer.len() {
        return Err(out_of_bounds());
    }
    Ok(AudioBuffer {
        samples: buffer.samples[start..end].to_vec(),
        sample_rate: buffer.sample_rate,
    })
}

/// Writes 16-bit PCM mono.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let writer = WavWriter::create(path, pcm16_spec(buffer.sample_rate))
        .map_err(|e| AudioError::Write(e.to_string()))?;
    encode_pcm16(buffer, writer)
}

/// Encodes to an in-memory 16-bit PCM WAV image.
pub fn encode_wav_bytes(buffer: &AudioBuffer) -> Result<Vec<u8>, AudioError> {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + buffer.len() * 2));
    let writer = WavWriter::new(&mut cursor, pcm16_spec(buffer.sample_rate))
        .map_err(|e| AudioError::Write(e.to_string()))?;
    encode_pcm16(buffer, writer)?;
    Ok(cursor.into_inner())
}

fn pcm16_spec(sample_rate: u32) -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

fn encode_pcm16<W: std::io::Write + Seek>(
    buffer: &AudioBuffer,
    mut writer: WavWriter<W>,
) -> Result<(), AudioError> {
    let write_err = |e: hound::Error| AudioError::Write(e.to_string());
    for &s in &buffer.samples {
        let code = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code).map_err(write_err)?;
    }
    writer.finalize().map_err(write_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, sr: u32, n: usize, amp: f64) -> Vec<f32> {
        (0..n)
            .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin()) as f32)
            .collect()
    }

    fn write_raw(path: &Path, spec: WavSpec, frames: &[i32]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for &f in frames {
            match spec.bits_per_sample {
                16 => w.write_sample(f as i16).unwrap(),
                _ => w.write_sample(f).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn one_second_of_silence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let spec = pcm16_spec(44_100);
        write_raw(&path, spec, &vec![0; 44_100]);
        let buf = load_wav(&path).unwrap();
        assert_eq!(buf.len(), 44_100);
        assert!(buf.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn most_negative_pcm16_code_is_minus_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("min.wav");
        write_raw(&path, pcm16_spec(8_000), &[-32768, 32767, 0]);
        let buf = load_wav(&path).unwrap();
        assert_eq!(buf.samples()[0], -1.0);
        assert_eq!(buf.samples()[1], 32767.0 / 32768.0);
    }

    #[test]
    fn symmetric_stereo_downmixes_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = WavSpec {
            channels: 2,
            ..pcm16_spec(8_000)
        };
        write_raw(&path, spec, &[16384, -16384, 16384, -16384]);
        let buf = load_wav(&path).unwrap();
        assert_eq!(buf.samples(), &[0.0, 0.0]);
    }

    #[test]
    fn identical_channels_downmix_to_that_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.wav");
        let spec = WavSpec {
            channels: 3,
            ..pcm16_spec(8_000)
        };
        let mono = [100, -2000, 32767, -32768];
        let frames: Vec<i32> = mono.iter().flat_map(|&s| [s, s, s]).collect();
        write_raw(&path, spec, &frames);
        let buf = load_wav(&path).unwrap();
        let expected: Vec<f32> = mono.iter().map(|&s| s as f32 / 32768.0).collect();
        assert_eq!(buf.samples(), expected.as_slice());
    }

    #[test]
    fn reads_24_and_32_bit_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let p24 = dir.path().join("a24.wav");
        write_raw(
            &p24,
            WavSpec {
                bits_per_sample: 24,
                ..pcm16_spec(8_000)
            },
            &[-(1 << 23), 1 << 22],
        );
        assert_eq!(load_wav(&p24).unwrap().samples(), &[-1.0, 0.5]);

        let p32 = dir.path().join("a32.wav");
        write_raw(
            &p32,
            WavSpec {
                bits_per_sample: 32,
                ..pcm16_spec(8_000)
            },
            &[i32::MIN, 1 << 29],
        );
        assert_eq!(load_wav(&p32).unwrap().samples(), &[-1.0, 0.25]);

        let pf = dir.path().join("f32.wav");
        let mut w = WavWriter::create(
            &pf,
            WavSpec {
                bits_per_sample: 32,
                sample_format: SampleFormat::Float,
                ..pcm16_spec(8_000)
            },
        )
        .unwrap();
        for s in [0.25f32, -0.75, 1.5] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(load_wav(&pf).unwrap().samples(), &[0.25, -0.75, 1.0]);
    }

    #[test]
    fn errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_wav(dir.path().join("missing.wav")),
            Err(AudioError::Unreadable(_))
        ));

        let garbage = dir.path().join("garbage.wav");
        std::fs::write(&garbage, b"not a wav file at all").unwrap();
        assert!(matches!(load_wav(&garbage), Err(AudioError::Unreadable(_))));

        let empty = dir.path().join("empty.wav");
        write_raw(&empty, pcm16_spec(8_000), &[]);
        assert!(matches!(load_wav(&empty), Err(AudioError::EmptyPayload)));

        let p8 = dir.path().join("u8.wav");
        let mut w = WavWriter::create(
            &p8,
            WavSpec {
                bits_per_sample: 8,
                ..pcm16_spec(8_000)
            },
        )
        .unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p8), Err(AudioError::UnsupportedCodec(_))));
    }

    #[test]
    fn slice_index_arithmetic() {
        let buf = AudioBuffer::new(vec![0.0; 44_100], 44_100).unwrap();
        assert_eq!(slice(&buf, 250.0, 750.0).unwrap().len(), 22_050);
        assert_eq!(slice(&buf, 0.0, buf.duration_ms()).unwrap(), buf);
        assert!(matches!(
            slice(&buf, 500.0, 400.0),
            Err(AudioError::RangeOutOfBounds { .. })
        ));
        assert!(slice(&buf, 0.0, 1000.1).is_err());
        assert!(slice(&buf, -1.0, 10.0).is_err());
    }

    #[test]
    fn round_trip_within_one_quantization_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let buf = AudioBuffer::new(sine(440.0, 44_100, 44_100, 0.9), 44_100).unwrap();
        write_wav(&buf, &path).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.len(), buf.len());
        assert_eq!(back.sample_rate(), 44_100);
        let max_err = buf
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err <= 1.0 / 32768.0, "max error {max_err}");
        assert_eq!(decode_wav_bytes(&encode_wav_bytes(&buf).unwrap()).unwrap(), back);
    }

    #[test]
    fn rejects_invalid_buffers() {
        assert!(matches!(
            AudioBuffer::new(vec![0.0], 0),
            Err(AudioError::InvalidSampleRate)
        ));
        assert!(matches!(
            AudioBuffer::new(vec![0.0, 1.5], 8_000),
            Err(AudioError::SampleOutOfRange { index: 1, .. })
        ));
    }
}
