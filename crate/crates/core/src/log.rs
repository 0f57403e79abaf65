//! Append-only annotation log in JSON Lines.
//!
//! Each session starts with a `session` header line recording the queue spec,
//! the RNG and the scheme version, followed by `play` and `label` events in
//! the order they were accepted. Replaying the lines reproduces every
//! session's state exactly.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scheme::{AnnotationRecord, Phase, QueueSpec};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error on annotation log: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotation log line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub coder_id: String,
    pub phase: Phase,
    pub queue: QueueSpec,
    pub rng: String,
    pub scheme_version: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayEvent {
    pub session_id: String,
    pub queue_item_id: String,
    /// Plays consumed after this one.
    pub play_count: u8,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub session_id: String,
    #[serde(flatten)]
    pub record: AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEvent {
    Session(SessionHeader),
    Play(PlayEvent),
    Label(LabelEvent),
}

impl LogEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log events always serialize")
    }
}

pub fn read_events<R: BufRead>(input: R) -> Result<Vec<LogEvent>, LogError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| LogError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(events)
}

pub fn read_log_file(path: impl AsRef<Path>) -> Result<Vec<LogEvent>, LogError> {
    read_events(BufReader::new(File::open(path)?))
}

/// Label records in log order, optionally restricted to one phase.
pub fn label_records<'a>(
    events: &'a [LogEvent],
    phase: Option<Phase>,
) -> impl Iterator<Item = &'a AnnotationRecord> + 'a {
    events.iter().filter_map(move |e| match e {
        LogEvent::Label(l) if phase.is_none_or(|p| l.record.pass == p) => Some(&l.record),
        _ => None,
    })
}

/// Label records grouped by coder, each group in log order.
pub fn records_by_coder(events: &[LogEvent], phase: Option<Phase>) -> BTreeMap<String, Vec<AnnotationRecord>> {
    let mut out: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    for r in label_records(events, phase) {
        out.entry(r.coder_id.clone()).or_default().push(r.clone());
    }
    out
}

/// Appends events and forces each to stable storage before returning.
pub struct LogWriter {
    file: File,
}

impl LogWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append(&mut self, event: &LogEvent) -> Result<(), LogError> {
        let mut line = event.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}
