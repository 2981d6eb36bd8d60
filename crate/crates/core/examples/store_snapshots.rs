//! Snapshots stay fixed while later batches are committed.

use chrono::Utc;
use hatewatch::retrieval::new_pair;
use hatewatch::store::{open_store, OpenMode, WriteBatch};
use hatewatch::PairOrigin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = open_store(dir.path(), OpenMode::ReadWrite)?;
    let pair = |n: u32| new_pair("en", &format!("hate {n}"), &format!("answer {n}"), PairOrigin::OperatorNew, Utc::now());

    store.commit(WriteBatch { pairs: vec![pair(1)], ..Default::default() })?;
    let before = store.snapshot();
    store.commit(WriteBatch { pairs: vec![pair(2), pair(3)], ..Default::default() })?;
    let after = store.snapshot();
    println!("old snapshot: version {} with {} pairs", before.version(), before.pairs()?.len());
    println!("new snapshot: version {} with {} pairs", after.version(), after.pairs()?.len());

    drop(store);
    let reader = open_store(dir.path(), OpenMode::Read)?;
    println!("reopened read-only at version {}, pairs_version {}", reader.version(), reader.pairs_version());
    Ok(())
}
