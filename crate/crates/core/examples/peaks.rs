//! Daily counts for a hashtag and the days above mean + one standard
//! deviation.

use chrono::NaiveDate;
use hatewatch::analytics::{daily_counts, detect_peaks};
use hatewatch::ingest::{ingest, IngestOptions, SourceDescriptor};
use hatewatch::store::{open_store, OpenMode};
use hatewatch::{DateRange, TimeSeries, Watchlist};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let day0 = NaiveDate::from_ymd_opt(2019, 3, 1).unwrap();
    let series = TimeSeries::from_counts("#banislam", day0, &[2, 2, 2, 2, 12, 2, 2, 2, 2, 2]);
    let report = detect_peaks(&series)?;
    println!("mean {:.1}  sd {:.1}  threshold {:.1}", report.mean, report.sd, report.threshold);
    print!("{}", report.to_csv());

    // the same computation over stored records
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/ingest_10.jsonl");
    let dir = tempfile::tempdir()?;
    let store = open_store(dir.path(), OpenMode::ReadWrite)?;
    ingest(&SourceDescriptor::file(fixture), &Watchlist::example_hashtags(), &store, &IngestOptions::default())?;
    let snapshot = store.snapshot();
    let range = DateRange::new(day0, NaiveDate::from_ymd_opt(2019, 3, 5).unwrap())?;
    let counts = daily_counts(snapshot.tweets()?, "banislam", range);
    let stored = detect_peaks(&counts.series)?;
    println!("stored #banislam: {:?}, peaks {:?}", counts.series.counts(), stored.peak_dates);
    Ok(())
}
