//! Per-session annotation state, driven only by log events so that a replay
//! of the log rebuilds it exactly.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use vocalcode::log::{LabelEvent, LogEvent, PlayEvent, SessionHeader};
use vocalcode::scheme::{
    build_ground_truth_queue, AnnotationRecord, ItemProgress, QueueItem, SchemeError,
};
use vocalcode::AnnotationClass;

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub header: SessionHeader,
    pub queue: Vec<QueueItem>,
    pub progress: Vec<ItemProgress>,
    /// Index of the first unlabeled item.
    pub cursor: usize,
    pub records: Vec<AnnotationRecord>,
}

/// What the coder client is told about the current item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextItem {
    Item {
        done: bool,
        queue_item_id: String,
        position: usize,
        total: usize,
        plays_used: u8,
        remaining_plays: u8,
    },
    Done {
        done: bool,
        total: usize,
        labeled: usize,
        class_counts: BTreeMap<u8, usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub session_id: String,
    pub coder_id: String,
    pub phase: String,
    pub total: usize,
    pub labeled: usize,
    pub plays: usize,
    pub class_counts: BTreeMap<u8, usize>,
}

impl SessionState {
    pub fn new(header: SessionHeader) -> Result<Self, ServiceError> {
        let queue = build_ground_truth_queue(&header.queue)?;
        Ok(Self {
            progress: vec![ItemProgress::default(); queue.len()],
            queue,
            header,
            cursor: 0,
            records: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.header.session_id
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.queue.len()
    }

    /// Position of `item` if it is the current one.
    fn current_index(&self, item: &str) -> Result<usize, ServiceError> {
        if self.queue.get(self.cursor).is_some_and(|q| q.queue_item_id == item) {
            return Ok(self.cursor);
        }
        let pos = self
            .queue
            .iter()
            .position(|q| q.queue_item_id == item)
            .ok_or_else(|| ServiceError::UnknownItem(item.to_string()))?;
        if pos != self.cursor {
            let msg = if self.is_done() {
                format!("session {} is complete", self.id())
            } else {
                format!("{item} is not the current item; expected {}", self.queue[self.cursor].queue_item_id)
            };
            return Err(ServiceError::Sequencing(msg));
        }
        Ok(pos)
    }

    pub fn segment_of(&self, item: &str) -> Result<&str, ServiceError> {
        let pos = self.current_index(item)?;
        Ok(&self.queue[pos].segment_id)
    }

    pub fn play_event(&self, item: &str, timestamp: DateTime<Utc>) -> Result<PlayEvent, ServiceError> {
        let pos = self.current_index(item)?;
        let progress = self.progress[pos];
        progress.check_play(item)?;
        Ok(PlayEvent {
            session_id: self.id().to_string(),
            queue_item_id: item.to_string(),
            play_count: progress.plays + 1,
            timestamp,
        })
    }

    pub fn label_event(
        &self,
        item: &str,
        class: AnnotationClass,
        timestamp: DateTime<Utc>,
    ) -> Result<LabelEvent, ServiceError> {
        let pos = self.current_index(item)?;
        let progress = self.progress[pos];
        progress.check_label(item)?;
        Ok(LabelEvent {
            session_id: self.id().to_string(),
            record: AnnotationRecord {
                queue_item_id: item.to_string(),
                segment_id: self.queue[pos].segment_id.clone(),
                coder_id: self.header.coder_id.clone(),
                class,
                play_count: progress.plays,
                pass: self.header.phase,
                timestamp,
            },
        })
    }

    /// Applies a play or label event for this session.
    pub fn apply(&mut self, event: &LogEvent) -> Result<(), ServiceError> {
        match event {
            LogEvent::Session(_) => Err(ServiceError::Storage(format!("repeated header for session {}", self.id()))),
            LogEvent::Play(p) => {
                let pos = self.current_index(&p.queue_item_id)?;
                let before = self.progress[pos].plays;
                if p.play_count != before + 1 {
                    return Err(ServiceError::Storage(format!(
                        "play count {} for {} does not follow {before}",
                        p.play_count, p.queue_item_id
                    )));
                }
                self.progress[pos].play(&p.queue_item_id)?;
                Ok(())
            }
            LogEvent::Label(l) => {
                let pos = self.current_index(&l.record.queue_item_id)?;
                if l.record.segment_id != self.queue[pos].segment_id {
                    return Err(ServiceError::Storage(format!(
                        "label for {} names the wrong segment",
                        l.record.queue_item_id
                    )));
                }
                self.progress[pos]
                    .label(&l.record.queue_item_id, l.record.class)
                    .map_err(|e: SchemeError| ServiceError::from(e))?;
                self.records.push(l.record.clone());
                self.cursor += 1;
                Ok(())
            }
        }
    }

    fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts: BTreeMap<u8, usize> = AnnotationClass::ALL.iter().map(|c| (c.code(), 0)).collect();
        for r in &self.records {
            *counts.entry(r.class.code()).or_default() += 1;
        }
        counts
    }

    /// Idempotent until the next accepted label.
    pub fn next_item(&self) -> NextItem {
        match self.queue.get(self.cursor) {
            Some(item) => {
                let p = self.progress[self.cursor];
                NextItem::Item {
                    done: false,
                    queue_item_id: item.queue_item_id.clone(),
                    position: self.cursor,
                    total: self.queue.len(),
                    plays_used: p.plays,
                    remaining_plays: p.remaining_plays(),
                }
            }
            None => NextItem::Done {
                done: true,
                total: self.queue.len(),
                labeled: self.records.len(),
                class_counts: self.class_counts(),
            },
        }
    }

    pub fn stats(&self) -> SessionStats {
        SessionStats {
            session_id: self.id().to_string(),
            coder_id: self.header.coder_id.clone(),
            phase: self.header.phase.to_string(),
            total: self.queue.len(),
            labeled: self.records.len(),
            plays: self.progress.iter().map(|p| p.plays as usize).sum(),
            class_counts: self.class_counts(),
        }
    }
}
