//! Session registry backed by the append-only annotation log.
//!
//! Every accepted play or label is appended and fsynced before the in-memory
//! session changes, so a restart that replays the log lands on exactly the
//! acknowledged state. The log writer keeps its own replica of all sessions
//! and periodically writes it out as `<log>.snapshot` together with the log
//! length it covers; startup loads the snapshot and replays only the tail.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use vocalcode::log::{read_events, LogEvent, LogWriter, SessionHeader};
use vocalcode::rng::RNG_NAME;
use vocalcode::scheme::{AnnotationRecord, QueueSpec, SCHEME_VERSION};
use vocalcode::{AnnotationClass, Phase};

use crate::error::ServiceError;
use crate::session::{NextItem, SessionState, SessionStats};

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSession {
    #[serde(default)]
    pub session_id: Option<String>,
    pub coder_id: String,
    pub phase: Phase,
    pub queue: QueueSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub total_items: usize,
    /// False when an identical session already existed and is resumed.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAck {
    pub queue_item_id: String,
    pub class: u8,
    pub next: NextItem,
}

#[derive(Serialize)]
struct SnapshotOut<'a> {
    log_bytes: u64,
    sessions: Vec<&'a SessionState>,
}

#[derive(Deserialize)]
struct SnapshotIn {
    log_bytes: u64,
    sessions: Vec<SessionState>,
}

pub fn snapshot_path(log_path: &Path) -> PathBuf {
    let mut name = log_path.as_os_str().to_owned();
    name.push(".snapshot");
    PathBuf::from(name)
}

fn apply_event(sessions: &mut BTreeMap<String, SessionState>, event: &LogEvent) -> Result<(), ServiceError> {
    match event {
        LogEvent::Session(h) => {
            if sessions.contains_key(&h.session_id) {
                return Err(ServiceError::Storage(format!("duplicate session header {}", h.session_id)));
            }
            sessions.insert(h.session_id.clone(), SessionState::new(h.clone())?);
            Ok(())
        }
        LogEvent::Play(p) => session_mut(sessions, &p.session_id)?.apply(event),
        LogEvent::Label(l) => session_mut(sessions, &l.session_id)?.apply(event),
    }
}

fn session_mut<'a>(
    sessions: &'a mut BTreeMap<String, SessionState>,
    id: &str,
) -> Result<&'a mut SessionState, ServiceError> {
    sessions
        .get_mut(id)
        .ok_or_else(|| ServiceError::Storage(format!("event for session {id} precedes its header")))
}

fn load_snapshot(path: &Path, log: &[u8]) -> Option<SnapshotIn> {
    let snap: SnapshotIn = serde_json::from_slice(&fs::read(path).ok()?).ok()?;
    let end = usize::try_from(snap.log_bytes).ok()?;
    let on_boundary = end == 0 || log.get(end - 1) == Some(&b'\n');
    (end <= log.len() && on_boundary).then_some(snap)
}

/// Rebuilds all sessions from the log (and snapshot, when usable). A trailing
/// line without a newline was never acknowledged and is cut off.
fn recover(log_path: &Path) -> Result<(BTreeMap<String, SessionState>, u64), ServiceError> {
    let bytes = match fs::read(log_path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(ServiceError::Storage(e.to_string())),
    };
    let valid = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let (mut sessions, start) = match load_snapshot(&snapshot_path(log_path), &bytes[..valid]) {
        Some(s) => (
            s.sessions.into_iter().map(|s| (s.id().to_string(), s)).collect(),
            s.log_bytes as usize,
        ),
        None => (BTreeMap::new(), 0),
    };
    for event in read_events(&bytes[start..valid])? {
        apply_event(&mut sessions, &event)?;
    }
    if valid < bytes.len() {
        tracing::warn!(dropped = bytes.len() - valid, "discarding unterminated final log line");
        let f = OpenOptions::new()
            .write(true)
            .open(log_path)
            .map_err(|e| ServiceError::Storage(e.to_string()))?;
        f.set_len(valid as u64).map_err(|e| ServiceError::Storage(e.to_string()))?;
        f.sync_all().map_err(|e| ServiceError::Storage(e.to_string()))?;
    }
    Ok((sessions, valid as u64))
}

struct LogSink {
    writer: LogWriter,
    snapshot_path: PathBuf,
    log_bytes: u64,
    replica: BTreeMap<String, SessionState>,
    since_snapshot: usize,
    snapshot_every: usize,
}

impl LogSink {
    fn append(&mut self, event: &LogEvent) -> Result<(), ServiceError> {
        self.writer.append(event)?;
        self.log_bytes += event.to_line().len() as u64 + 1;
        apply_event(&mut self.replica, event)?;
        self.since_snapshot += 1;
        if self.snapshot_every > 0 && self.since_snapshot >= self.snapshot_every {
            if let Err(e) = self.write_snapshot() {
                tracing::warn!(error = %e, "snapshot failed; the log alone remains authoritative");
            }
        }
        Ok(())
    }

    fn write_snapshot(&mut self) -> std::io::Result<()> {
        let snap = SnapshotOut {
            log_bytes: self.log_bytes,
            sessions: self.replica.values().collect(),
        };
        let mut tmp = self.snapshot_path.clone().into_os_string();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&serde_json::to_vec(&snap).map_err(std::io::Error::other)?)?;
        f.sync_all()?;
        fs::rename(&tmp, &self.snapshot_path)?;
        self.since_snapshot = 0;
        Ok(())
    }
}

pub struct Store {
    sessions: RwLock<BTreeMap<String, Arc<Mutex<SessionState>>>>,
    sink: Mutex<LogSink>,
}

impl Store {
    /// Opens (or creates) the log and restores every session it records.
    /// `snapshot_every` is the number of appended events between snapshots;
    /// 0 disables them.
    pub fn open(log_path: impl AsRef<Path>, snapshot_every: usize) -> Result<Self, ServiceError> {
        let log_path = log_path.as_ref();
        let (replica, log_bytes) = recover(log_path)?;
        let sessions = replica
            .iter()
            .map(|(id, s)| (id.clone(), Arc::new(Mutex::new(s.clone()))))
            .collect();
        let writer = LogWriter::open(log_path)?;
        Ok(Self {
            sessions: RwLock::new(sessions),
            sink: Mutex::new(LogSink {
                writer,
                snapshot_path: snapshot_path(log_path),
                log_bytes,
                replica,
                since_snapshot: 0,
                snapshot_every,
            }),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Creates a session, or resumes an existing one with the same id and
    /// identical coder, phase and queue.
    pub fn create_session(&self, req: NewSession) -> Result<SessionCreated, ServiceError> {
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let session_id = req.session_id.clone().unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        if let Some(existing) = sessions.get(&session_id) {
            let s = lock(existing);
            let h = &s.header;
            if h.coder_id != req.coder_id || h.phase != req.phase || h.queue != req.queue {
                return Err(ServiceError::Conflict(format!(
                    "session {session_id} exists with a different coder, phase or queue"
                )));
            }
            return Ok(SessionCreated { session_id, total_items: s.queue.len(), created: false });
        }
        let header = SessionHeader {
            session_id: session_id.clone(),
            coder_id: req.coder_id,
            phase: req.phase,
            queue: req.queue,
            rng: RNG_NAME.to_string(),
            scheme_version: SCHEME_VERSION.to_string(),
            created_at: Utc::now(),
        };
        let state = SessionState::new(header.clone())?;
        let total_items = state.queue.len();
        lock(&self.sink).append(&LogEvent::Session(header))?;
        sessions.insert(session_id.clone(), Arc::new(Mutex::new(state)));
        Ok(SessionCreated { session_id, total_items, created: true })
    }

    pub fn next_item(&self, id: &str) -> Result<NextItem, ServiceError> {
        let session = self.session(id)?;
        let next = lock(&session).next_item();
        Ok(next)
    }

    pub fn stats(&self, id: &str) -> Result<SessionStats, ServiceError> {
        let session = self.session(id)?;
        let stats = lock(&session).stats();
        Ok(stats)
    }

    /// Consumes one play of the current item and returns its audio together
    /// with the plays left. `fetch` maps a segment id to WAV bytes; it runs
    /// before the budget is touched, so a missing file costs nothing.
    pub fn play<F>(&self, id: &str, item: &str, fetch: F) -> Result<(Vec<u8>, u8), ServiceError>
    where
        F: FnOnce(&str) -> Result<Vec<u8>, ServiceError>,
    {
        let session = self.session(id)?;
        let mut s = lock(&session);
        let event = LogEvent::Play(s.play_event(item, Utc::now())?);
        let audio = fetch(s.segment_of(item)?)?;
        lock(&self.sink).append(&event)?;
        s.apply(&event)?;
        Ok((audio, s.progress[s.cursor].remaining_plays()))
    }

    /// Records a label for the current item; durable before it returns.
    pub fn label(&self, id: &str, item: &str, class: AnnotationClass) -> Result<LabelAck, ServiceError> {
        let session = self.session(id)?;
        let mut s = lock(&session);
        let event = LogEvent::Label(s.label_event(item, class, Utc::now())?);
        lock(&self.sink).append(&event)?;
        s.apply(&event)?;
        Ok(LabelAck { queue_item_id: item.to_string(), class: class.code(), next: s.next_item() })
    }

    /// All accepted labels, grouped by session id order then log order.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        let sessions: Vec<_> = self.sessions.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        sessions.iter().flat_map(|s| lock(s).records.clone()).collect()
    }

    pub fn snapshot(&self) -> Result<(), ServiceError> {
        lock(&self.sink).write_snapshot().map_err(|e| ServiceError::Storage(e.to_string()))
    }

    #[cfg(test)]
    fn state(&self, id: &str) -> SessionState {
        lock(&self.session(id).unwrap()).clone()
    }
}
