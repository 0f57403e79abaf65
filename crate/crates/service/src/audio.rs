//! Segment audio served to coders, cut from per-recording WAV files.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use vocalcode::audio_io::{encode_wav_bytes, load_wav, slice};
use vocalcode::{AudioBuffer, Segment};

use crate::error::ServiceError;

/// Recordings kept decoded in memory at once.
const CACHE_RECORDINGS: usize = 8;

pub struct AudioLibrary {
    segments: HashMap<String, Segment>,
    audio_dir: PathBuf,
    cache: Mutex<HashMap<String, Arc<AudioBuffer>>>,
}

impl AudioLibrary {
    /// Recording `source` is read from `<audio_dir>/<source>.wav`.
    pub fn new(segments: &[Segment], audio_dir: impl Into<PathBuf>) -> Self {
        Self {
            segments: segments.iter().map(|s| (s.id.clone(), s.clone())).collect(),
            audio_dir: audio_dir.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn contains(&self, segment_id: &str) -> bool {
        self.segments.contains_key(segment_id)
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.segments.keys().map(String::as_str)
    }

    // Error details name files and recordings, so they go to the server log
    // and the client only learns that audio is unavailable.
    fn unavailable(detail: String) -> ServiceError {
        tracing::error!(%detail, "segment audio unavailable");
        ServiceError::Audio("segment audio could not be loaded".into())
    }

    fn recording(&self, source: &str) -> Result<Arc<AudioBuffer>, ServiceError> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(buf) = cache.get(source) {
            return Ok(buf.clone());
        }
        let path = self.audio_dir.join(format!("{source}.wav"));
        let buf = Arc::new(load_wav(&path).map_err(|e| Self::unavailable(format!("{}: {e}", path.display())))?);
        if cache.len() >= CACHE_RECORDINGS {
            cache.clear();
        }
        cache.insert(source.to_string(), buf.clone());
        Ok(buf)
    }

    pub fn segment_wav(&self, segment_id: &str) -> Result<Vec<u8>, ServiceError> {
        let seg = self
            .segments
            .get(segment_id)
            .ok_or_else(|| Self::unavailable(format!("segment {segment_id} is not in the manifest")))?;
        let rec = self.recording(&seg.source)?;
        let clip = slice(&rec, seg.start_ms, seg.end_ms).map_err(|e| Self::unavailable(format!("{segment_id}: {e}")))?;
        encode_wav_bytes(&clip).map_err(|e| Self::unavailable(format!("{segment_id}: {e}")))
    }
}
