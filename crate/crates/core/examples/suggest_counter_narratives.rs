//! Builds a tf-idf index over the bundled pairs and ranks counter-narratives
//! for a hate message. Pass a message as the first argument to try another.

use hatewatch::retrieval::{build_index, sample_pairs, suggest, TfIdfIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let query = std::env::args().nth(1).unwrap_or_else(|| "Every Muslim is a potential terrorist".into());
    let index = build_index(&sample_pairs(), "en")?;
    println!("{} documents, {} terms", index.doc_count, index.vocabulary.len());
    for s in suggest(&query, &index, 4)? {
        println!("{}. [{:.3}] {}", s.rank, s.score, s.counter_text);
    }

    // artifacts round-trip to disk
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("en.idx");
    index.save(&path)?;
    let loaded = TfIdfIndex::load(&path)?;
    assert_eq!(suggest(&query, &loaded, 4)?, suggest(&query, &index, 4)?);
    println!("reloaded index gives identical suggestions");
    Ok(())
}
