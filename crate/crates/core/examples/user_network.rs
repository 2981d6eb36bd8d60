//! Reply/retweet network between users and the most connected accounts.

use chrono::NaiveDate;
use hatewatch::analytics::{louvain, most_connected_users, user_activity_series, user_graph};
use hatewatch::ingest::{ingest, IngestOptions, SourceDescriptor};
use hatewatch::store::{open_store, OpenMode};
use hatewatch::{DateRange, Watchlist};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/ingest_10.jsonl");
    let dir = tempfile::tempdir()?;
    let store = open_store(dir.path(), OpenMode::ReadWrite)?;
    ingest(&SourceDescriptor::file(fixture), &Watchlist::example_hashtags(), &store, &IngestOptions::default())?;

    let snapshot = store.snapshot();
    let tweets = snapshot.tweets()?;
    let range = DateRange::new(NaiveDate::from_ymd_opt(2019, 2, 22).unwrap(), NaiveDate::from_ymd_opt(2019, 3, 3).unwrap())?;
    let graph = user_graph(tweets, range);
    for (a, b, w) in graph.edges() {
        println!("{a} -- {b}  ({w})");
    }
    let partition = louvain(&graph, 0);
    println!("communities: {:?}", partition.communities());
    for u in most_connected_users(&graph, 3) {
        let activity = user_activity_series(tweets, &u.user, range);
        println!("{:<8} degree {} weight {}  messages {}", u.user, u.degree, u.weighted_degree, activity.total());
    }
    Ok(())
}
