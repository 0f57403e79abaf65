//! Class summary table and a two-group comparison on synthetic segments.
//!
//!     cargo run -p vocalcode --example group_statistics

use std::collections::BTreeMap;

use vocalcode::analytics::{class_table, group_compare, Metric, Observation, TTestVariant};
use vocalcode::AnnotationClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Deterministic pseudo-data: durations and f0 values spread by a simple hash.
    let spread = |i: usize, k: usize| ((i * 2_654_435_761 + k) % 1000) as f64 / 1000.0;
    let observations: Vec<Observation> = (0..400)
        .map(|i| Observation {
            segment_id: format!("seg_{i:04}"),
            source: format!("rec{:02}", i % 8),
            class: AnnotationClass::ALL[i % 5],
            duration_s: 0.1 + 0.6 * spread(i, 1).powi(2),
            f0_hz: (spread(i, 2) > 0.4).then(|| 300.0 + 120.0 * spread(i, 3)),
        })
        .collect();

    print!("{}", class_table(&observations).to_text());
    println!();

    let groups: BTreeMap<String, String> =
        (0..8).map(|r| (format!("rec{r:02}"), if r % 2 == 0 { "f" } else { "m" }.to_string())).collect();
    for metric in [Metric::Duration, Metric::F0] {
        let report = group_compare(&observations, &groups, metric, TTestVariant::Pooled)?;
        print!("{}", report.to_text());
        println!();
    }
    Ok(())
}
