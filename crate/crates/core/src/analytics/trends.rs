use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{normalize_term, DateRange, EmptyRange, TweetRecord, Watchlist};

pub const DEFAULT_WINDOW_DAYS: u32 = 10;
pub const DEFAULT_RECENT_TERMS: usize = 5;

/// The default analysis range: `DEFAULT_WINDOW_DAYS` days ending at the
/// latest record's date, or at `fallback` when there are no records. Either
/// bound may be pinned explicitly.
pub fn default_range(
    records: &[TweetRecord],
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    fallback: NaiveDate,
) -> Result<DateRange, EmptyRange> {
    let span = Duration::days(i64::from(DEFAULT_WINDOW_DAYS) - 1);
    let (start, end) = match (from, to) {
        (Some(f), Some(t)) => (f, t),
        (Some(f), None) => (f, f + span),
        (None, Some(t)) => (t - span, t),
        (None, None) => {
            let end = records.iter().map(TweetRecord::date).max().unwrap_or(fallback);
            (end - span, end)
        }
    };
    DateRange::new(start, end)
}

/// Retrospective analysis window around one term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendWindow {
    pub term: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub span: u32,
}

impl TrendWindow {
    pub fn new(term: &str, start_date: NaiveDate, end_date: NaiveDate) -> Result<Self, EmptyRange> {
        let range = DateRange::new(start_date, end_date)?;
        Ok(TrendWindow {
            term: normalize_term(term),
            start_date,
            end_date,
            span: range.len_days() as u32,
        })
    }

    /// Window of `span` days (at least one) ending on `end_date`.
    pub fn ending(term: &str, end_date: NaiveDate, span: u32) -> Self {
        let span = span.max(1);
        let start_date = end_date - Duration::days(i64::from(span) - 1);
        TrendWindow { term: normalize_term(term), start_date, end_date, span }
    }

    /// Default ten-day window.
    pub fn ten_days(term: &str, end_date: NaiveDate) -> Self {
        Self::ending(term, end_date, DEFAULT_WINDOW_DAYS)
    }

    pub fn range(&self) -> DateRange {
        DateRange { start: self.start_date, end: self.end_date }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentTerm {
    pub term: String,
    pub last_seen: DateTime<Utc>,
}

/// Watchlist terms ordered by their most recent occurrence at or before
/// `now`; terms never seen are left out.
pub fn top_recent_terms(
    records: &[TweetRecord],
    watchlists: &[Watchlist],
    now: DateTime<Utc>,
    k: usize,
) -> Vec<RecentTerm> {
    let mut last: BTreeMap<String, Option<DateTime<Utc>>> = BTreeMap::new();
    for wl in watchlists {
        for t in &wl.terms {
            last.insert(t.normalized(), None);
        }
    }
    for r in records.iter().filter(|r| r.created_at <= now) {
        for (term, seen) in last.iter_mut() {
            if seen.is_none_or(|s| r.created_at > s) && r.contains_term(term) {
                *seen = Some(r.created_at);
            }
        }
    }
    let mut out: Vec<RecentTerm> = last
        .into_iter()
        .filter_map(|(term, seen)| seen.map(|last_seen| RecentTerm { term, last_seen }))
        .collect();
    out.sort_by(|a, b| b.last_seen.cmp(&a.last_seen).then_with(|| a.term.cmp(&b.term)));
    out.truncate(k);
    out
}

/// Records in the window containing the term, by retweet count then
/// recency (newest first), then id.
pub fn popular_messages(records: &[TweetRecord], term: &str, window: DateRange, k: usize) -> Vec<TweetRecord> {
    let norm = normalize_term(term);
    let mut hits: Vec<&TweetRecord> = records
        .iter()
        .filter(|r| window.contains(r.date()) && r.contains_term(&norm))
        .collect();
    hits.sort_by(|a, b| {
        b.retweet_count
            .cmp(&a.retweet_count)
            .then_with(|| b.created_at.cmp(&a.created_at))
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.into_iter().take(k).cloned().collect()
}
