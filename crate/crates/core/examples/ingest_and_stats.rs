//! Ingests the bundled 10-record fixture into a temporary store and prints
//! per-language counts by message kind.

use hatewatch::ingest::{ingest, load_watchlists, IngestOptions, SourceDescriptor};
use hatewatch::store::{open_store, OpenMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir()?;
    let store = open_store(dir.path().join("store"), OpenMode::ReadWrite)?;
    let watchlists = load_watchlists(fixtures.join("watchlist_en.json"))?;

    let source = SourceDescriptor::file(fixtures.join("ingest_10.jsonl"));
    let stats = ingest(&source, &watchlists, &store, &IngestOptions::default())?;
    println!("{:<9} {:>8} {:>7} {:>8}", "language", "original", "replies", "retweets");
    for (lang, c) in &stats.languages {
        println!("{lang:<9} {:>8} {:>7} {:>8}", c.original, c.replies, c.retweets);
    }
    println!("rejected (no watchlist match): {}", stats.rejected_no_match);
    println!("stored {}, store version {}", stats.stored, store.version());

    // same input again: everything is a duplicate
    let again = ingest(&source, &watchlists, &store, &IngestOptions::default())?;
    println!("second run stored {} ({} duplicates)", again.stored, again.duplicates);
    Ok(())
}
