//! Hate-term monitoring and counter-narrative suggestion.
//!
//! The crate ingests tweet-like JSONL into an append-only [`store`], runs
//! monitoring [`analytics`] over store snapshots (daily series with peak
//! flags, hashtag co-occurrence communities, user-interaction networks),
//! suggests counter-narratives for a hate message through tf-idf
//! [`retrieval`], and scores operator activity with [`metrics`].
//! [`service`] exposes all of this over an authenticated HTTP/JSON API and
//! [`cli`] drives it from the command line.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod analytics;
pub mod cli;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod retrieval;
pub mod service;
pub mod store;

pub use model::{
    validate_record, ActivityEvent, CnPair, DateRange, EventType, MessageKind, PairOrigin, Partition, TimeSeries,
    TweetRecord, Watchlist, WatchTerm, WeightedGraph,
};
