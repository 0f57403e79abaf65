//! Builds a seeded ground-truth queue with re-presented duplicates.
//!
//!     cargo run -p vocalcode --example build_queue [seed]

use vocalcode::scheme::{build_ground_truth_queue, draw_sets, QueueSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let ids: Vec<String> = (0..1000).map(|i| format!("rec01_{i:05}")).collect();

    let sets = draw_sets(&ids, 3, 50, seed)?;
    println!("consolidation sets: {} x {} segments", sets.len(), sets[0].len());

    let queue = build_ground_truth_queue(&QueueSpec { segment_ids: ids, n_duplicates: 20, rng_seed: seed })?;
    println!("queue of {} items, seed {seed}", queue.len());
    for item in queue.iter().take(8) {
        let mark = if item.is_duplicate { " (repeat)" } else { "" };
        println!("  {} -> {}{mark}", item.queue_item_id, item.segment_id);
    }
    Ok(())
}
