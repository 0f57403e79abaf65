//! Runs a short annotation session against the play budget and replays it
//! from the append-only log.
//!
//!     cargo run -p vocalcode --example annotation_log

use chrono::Utc;
use vocalcode::log::{read_log_file, records_by_coder, LabelEvent, LogEvent, LogWriter, PlayEvent, SessionHeader};
use vocalcode::rng::RNG_NAME;
use vocalcode::scheme::{build_ground_truth_queue, AnnotationTracker, QueueSpec, SCHEME_VERSION};
use vocalcode::{AnnotationClass, Phase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = QueueSpec {
        segment_ids: (0..5).map(|i| format!("rec_{i:05}")).collect(),
        n_duplicates: 1,
        rng_seed: 3,
    };
    let queue = build_ground_truth_queue(&spec)?;
    let path = std::env::temp_dir().join("vocalcode_example_log.jsonl");
    let _ = std::fs::remove_file(&path);
    let mut log = LogWriter::open(&path)?;
    log.append(&LogEvent::Session(SessionHeader {
        session_id: "demo".into(),
        coder_id: "coder-a".into(),
        phase: Phase::GroundTruth,
        queue: spec,
        rng: RNG_NAME.into(),
        scheme_version: SCHEME_VERSION.into(),
        created_at: Utc::now(),
    }))?;

    let mut tracker = AnnotationTracker::new(&queue, Phase::GroundTruth);
    for (n, item) in queue.iter().enumerate() {
        let id = &item.queue_item_id;
        for _ in 0..=(n % 3) {
            let remaining = tracker.record_play(id, "coder-a")?;
            let play_count = tracker.progress(id, "coder-a").plays;
            log.append(&LogEvent::Play(PlayEvent {
                session_id: "demo".into(),
                queue_item_id: id.clone(),
                play_count,
                timestamp: Utc::now(),
            }))?;
            println!("{id}: played, {remaining} plays left");
        }
        if tracker.progress(id, "coder-a").remaining_plays() == 0 {
            // A fourth listen is refused.
            println!("{id}: {}", tracker.record_play(id, "coder-a").unwrap_err());
        }
        let record = tracker.record_label(id, "coder-a", AnnotationClass::ALL[n % 5], Utc::now())?;
        log.append(&LogEvent::Label(LabelEvent { session_id: "demo".into(), record }))?;
    }

    let events = read_log_file(&path)?;
    let replayed = records_by_coder(&events, Some(Phase::GroundTruth));
    println!("{} events in {}, {} labels replayed", events.len(), path.display(), replayed["coder-a"].len());
    Ok(())
}
