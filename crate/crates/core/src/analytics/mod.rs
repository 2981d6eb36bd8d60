//! Read-only analytics over stored records: frequency series and peaks,
//! co-occurrence and user networks, Louvain communities, recent and popular
//! content.
//!
//! Every function takes a slice of records (normally from a store
//! [`Snapshot`](crate::store::Snapshot)) and never mutates it.

mod export;
mod louvain;
mod network;
mod series;
mod trends;

pub use export::{to_export, to_graphml, GraphEdge, GraphExport, GraphNode};
pub use louvain::{louvain, louvain_cancellable, modularity, Cancelled};
pub use network::{cooccurrence_graph, most_connected_users, user_graph, RankedUser, UserRanking};
pub use series::{daily_counts, detect_peaks, user_activity_series, DailyCounts, PeakReport};
pub use trends::{
    default_range, popular_messages, top_recent_terms, RecentTerm, TrendWindow, DEFAULT_RECENT_TERMS, DEFAULT_WINDOW_DAYS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("need at least {needed} buckets, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("modularity is undefined for a graph without edges")]
    UndefinedModularity,
    #[error("node '{0}' has no community")]
    UnassignedNode(String),
}
