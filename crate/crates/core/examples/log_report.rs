//! Summarizes an operator activity log: accuracy, time per counter-narrative
//! and post-edit rate.

use hatewatch::metrics::{
    mean_hter, read_events_jsonl, session_breakdown, sessions_csv, summarize_logs, UNASSISTED_MINUTES_PER_CN,
};
use hatewatch::retrieval::{build_index, sample_pairs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/activity_log.jsonl");
    let events = read_events_jsonl(&std::fs::read_to_string(path)?)?;
    let index = build_index(&sample_pairs(), "en")?;

    let summary = summarize_logs(&events, &[&index])?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(m) = summary.mean_minutes_modified {
        println!("minutes per edited suggestion: {m:.1} (writing from scratch: about {UNASSISTED_MINUTES_PER_CN})");
    }
    println!("mean HTER of modified suggestions: {:.3}", mean_hter(&events)?);
    print!("{}", sessions_csv(&session_breakdown(&events)?));
    Ok(())
}
