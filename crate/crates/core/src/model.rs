//! Shared domain types.
//!
//! Every type here is an immutable value with a canonical snake_case JSON
//! encoding; the stores, the HTTP API and the CLI all exchange these shapes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

/// Kind of an ingested message, matching the original / reply / retweet split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Original,
    Reply,
    Retweet,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Original => "original",
            MessageKind::Reply => "reply",
            MessageKind::Retweet => "retweet",
        }
    }
}

/// One ingested tweet-like message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub lang: String,
    pub author: String,
    pub hashtags: Vec<String>,
    pub kind: MessageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub referenced_id: Option<String>,
    #[serde(default)]
    pub retweet_count: u64,
}

impl TweetRecord {
    pub fn date(&self) -> NaiveDate {
        self.created_at.date_naive()
    }

    /// True if the record carries `term` either as a hashtag or as a
    /// case-insensitive keyword at word boundaries in its text.
    pub fn contains_term(&self, term: &str) -> bool {
        let norm = normalize_term(term);
        if norm.is_empty() {
            return false;
        }
        self.hashtags.contains(&norm) || contains_word(&self.text, &norm)
    }
}

/// A violated [`TweetRecord`] invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    EmptyId,
    RetweetMissingReferencedId,
    OriginalHasReferencedId,
    EmptyHashtag,
    HashtagNotLowercase { hashtag: String },
    HashtagHasPrefix { hashtag: String },
    DuplicateHashtag { hashtag: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "empty id"),
            Violation::RetweetMissingReferencedId => write!(f, "retweet missing referenced_id"),
            Violation::OriginalHasReferencedId => write!(f, "original has referenced_id"),
            Violation::EmptyHashtag => write!(f, "empty hashtag"),
            Violation::HashtagNotLowercase { hashtag } => {
                write!(f, "hashtag not lowercase: {hashtag}")
            }
            Violation::HashtagHasPrefix { hashtag } => write!(f, "hashtag has '#' prefix: {hashtag}"),
            Violation::DuplicateHashtag { hashtag } => write!(f, "duplicate hashtag: {hashtag}"),
        }
    }
}

/// Checks every [`TweetRecord`] invariant that can be judged from the record
/// alone. Id uniqueness is enforced by the store.
pub fn validate_record(record: &TweetRecord) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if record.id.trim().is_empty() {
        violations.push(Violation::EmptyId);
    }
    match (record.kind, &record.referenced_id) {
        (MessageKind::Retweet, None) => violations.push(Violation::RetweetMissingReferencedId),
        (MessageKind::Original, Some(_)) => violations.push(Violation::OriginalHasReferencedId),
        _ => {}
    }
    let mut seen = HashSet::new();
    for tag in &record.hashtags {
        if tag.is_empty() {
            violations.push(Violation::EmptyHashtag);
            continue;
        }
        if tag.starts_with('#') {
            violations.push(Violation::HashtagHasPrefix { hashtag: tag.clone() });
        }
        if tag.to_lowercase() != *tag {
            violations.push(Violation::HashtagNotLowercase { hashtag: tag.clone() });
        }
        if !seen.insert(tag.as_str()) {
            violations.push(Violation::DuplicateHashtag { hashtag: tag.clone() });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Lowercases a hashtag or keyword and strips a leading '#'.
pub fn normalize_term(term: &str) -> String {
    term.trim().trim_start_matches('#').to_lowercase()
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Case-insensitive search for `needle` in `haystack` where the match must
/// start and end at word boundaries. `needle` must already be lowercase.
pub fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let hay = haystack.to_lowercase();
    let first = needle.chars().next().map(is_word_char).unwrap_or(false);
    let last = needle.chars().last().map(is_word_char).unwrap_or(false);
    let mut from = 0;
    while let Some(pos) = hay[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = !first || hay[..start].chars().last().is_none_or(|c| !is_word_char(c));
        let after_ok = !last || hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return true;
        }
        // advance by one char
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// One watchlist entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchTerm {
    pub surface: String,
    pub is_hashtag: bool,
}

impl WatchTerm {
    pub fn normalized(&self) -> String {
        normalize_term(&self.surface)
    }
}

/// Per-language list of hashtags and keywords of interest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Watchlist {
    pub language: String,
    pub terms: Vec<WatchTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WatchlistError {
    #[error("watchlist for '{0}' has no terms")]
    Empty(String),
    #[error("watchlist for '{language}' repeats term '{term}'")]
    DuplicateTerm { language: String, term: String },
}

impl Watchlist {
    pub fn new(language: impl Into<String>, terms: Vec<WatchTerm>) -> Result<Self, WatchlistError> {
        let wl = Watchlist { language: language.into(), terms };
        wl.validate()?;
        Ok(wl)
    }

    pub fn validate(&self) -> Result<(), WatchlistError> {
        if self.terms.is_empty() {
            return Err(WatchlistError::Empty(self.language.clone()));
        }
        let mut seen = HashSet::new();
        for t in &self.terms {
            let key = (t.normalized(), t.is_hashtag);
            if !seen.insert(key) {
                return Err(WatchlistError::DuplicateTerm {
                    language: self.language.clone(),
                    term: t.surface.clone(),
                });
            }
        }
        Ok(())
    }

    /// The four example hashtags known from the monitored deployment. Real
    /// deployments load their full per-language list from a file.
    pub fn example_hashtags() -> Vec<Watchlist> {
        let tag = |s: &str| WatchTerm { surface: s.to_string(), is_hashtag: true };
        vec![
            Watchlist { language: "en".into(), terms: vec![tag("#banislam"), tag("#stopIslam")] },
            Watchlist { language: "it".into(), terms: vec![tag("#NoMoschee")] },
            Watchlist { language: "fr".into(), terms: vec![tag("#IslamHorsDEurope")] },
        ]
    }
}

/// Where a counter-narrative pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOrigin {
    Seed,
    OperatorNew,
    OperatorModified,
}

impl PairOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            PairOrigin::Seed => "seed",
            PairOrigin::OperatorNew => "operator_new",
            PairOrigin::OperatorModified => "operator_modified",
        }
    }
}

impl std::str::FromStr for PairOrigin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seed" => Ok(PairOrigin::Seed),
            "operator_new" | "operatornew" | "new" => Ok(PairOrigin::OperatorNew),
            "operator_modified" | "operatormodified" | "modified" => Ok(PairOrigin::OperatorModified),
            other => Err(format!("unknown origin '{other}'")),
        }
    }
}

pub const DEFAULT_LANGUAGES: [&str; 3] = ["en", "fr", "it"];

/// A hate-message / counter-narrative pair: the retrieval corpus unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnPair {
    pub id: String,
    pub language: String,
    pub hate_text: String,
    pub counter_text: String,
    pub origin: PairOrigin,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PairError {
    #[error("pair has an empty id")]
    EmptyId,
    #[error("pair {0} has empty hate_text")]
    EmptyHate(String),
    #[error("pair {0} has empty counter_text")]
    EmptyCounter(String),
    #[error("pair {id} has unsupported language '{language}'")]
    Language { id: String, language: String },
}

impl CnPair {
    /// Deterministic id derived from the (language, hate, counter) triple.
    pub fn derive_id(language: &str, hate_text: &str, counter_text: &str) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(language.as_bytes());
        h.update([0]);
        h.update(hate_text.as_bytes());
        h.update([0]);
        h.update(counter_text.as_bytes());
        format!("cn-{}", &hex::encode(h.finalize())[..12])
    }

    pub fn validate(&self, languages: &[String]) -> Result<(), PairError> {
        if self.id.trim().is_empty() {
            return Err(PairError::EmptyId);
        }
        if self.hate_text.trim().is_empty() {
            return Err(PairError::EmptyHate(self.id.clone()));
        }
        if self.counter_text.trim().is_empty() {
            return Err(PairError::EmptyCounter(self.id.clone()));
        }
        if !languages.contains(&self.language) {
            return Err(PairError::Language { id: self.id.clone(), language: self.language.clone() });
        }
        Ok(())
    }

    pub fn triple(&self) -> (&str, &str, &str) {
        (&self.language, &self.hate_text, &self.counter_text)
    }
}

/// Inclusive range of UTC calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("empty date range: {start} is after {end}")]
pub struct EmptyRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, EmptyRange> {
        if start > end {
            return Err(EmptyRange { start, end });
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }

    pub fn len_days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

/// Daily count series for one term; contiguous, missing days are zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub term: String,
    pub buckets: Vec<(NaiveDate, u64)>,
}

impl TimeSeries {
    /// Builds a series starting at `start` with one bucket per count.
    pub fn from_counts(term: impl Into<String>, start: NaiveDate, counts: &[u64]) -> Self {
        let buckets = start.iter_days().zip(counts.iter().copied()).collect();
        TimeSeries { term: term.into(), buckets }
    }

    pub fn counts(&self) -> Vec<u64> {
        self.buckets.iter().map(|(_, c)| *c).collect()
    }

    pub fn total(&self) -> u64 {
        self.buckets.iter().map(|(_, c)| c).sum()
    }

    /// Dates strictly increasing by exactly one day.
    pub fn is_contiguous(&self) -> bool {
        self.buckets
            .windows(2)
            .all(|w| w[0].0.succ_opt() == Some(w[1].0))
    }
}

/// Undirected weighted graph with string labels. No self-loops, at most one
/// edge per unordered pair, positive weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<(String, String), f64>,
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, label: impl Into<String>) {
        self.nodes.insert(label.into());
    }

    /// Adds `weight` to the edge between `a` and `b`, creating both nodes.
    /// Self-loops and non-positive weights are ignored.
    pub fn add_weight(&mut self, a: &str, b: &str, weight: f64) {
        if a == b || weight.is_nan() || weight <= 0.0 {
            return;
        }
        self.nodes.insert(a.to_string());
        self.nodes.insert(b.to_string());
        *self.edges.entry(edge_key(a, b)).or_insert(0.0) += weight;
    }

    pub fn remove_edge(&mut self, a: &str, b: &str) -> Option<f64> {
        self.edges.remove(&edge_key(a, b))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    /// Edges as `(lo, hi, weight)` with `lo < hi`, in label order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges.iter().map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn contains_node(&self, label: &str) -> bool {
        self.nodes.contains(label)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    pub fn retain_edges(&mut self, mut keep: impl FnMut(f64) -> bool) {
        self.edges.retain(|_, w| keep(*w));
    }

    /// (degree, weighted degree) per node.
    pub fn degrees(&self) -> BTreeMap<&str, (usize, f64)> {
        let mut out: BTreeMap<&str, (usize, f64)> =
            self.nodes.iter().map(|n| (n.as_str(), (0, 0.0))).collect();
        for ((a, b), w) in &self.edges {
            for n in [a, b] {
                let e = out.get_mut(n.as_str()).expect("edge endpoint is a node");
                e.0 += 1;
                e.1 += w;
            }
        }
        out
    }
}

fn edge_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Community assignment over a graph's nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: BTreeMap<String, usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn community_count(&self) -> usize {
        self.assignment.values().copied().collect::<BTreeSet<_>>().len()
    }

    /// Node labels grouped by community id.
    pub fn communities(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, c) in &self.assignment {
            if let Some(group) = out.get_mut(*c) {
                group.push(node.clone());
            }
        }
        out
    }

    /// Community ids are exactly `0..k`.
    pub fn ids_contiguous(&self) -> bool {
        let ids: BTreeSet<usize> = self.assignment.values().copied().collect();
        ids.iter().copied().eq(0..ids.len())
    }
}

/// Operator action recorded by the workbench.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    SuggestionShown,
    SuggestionModified,
    SuggestionDiscarded,
    #[serde(rename = "new_cn_saved")]
    NewCNSaved,
    #[serde(rename = "cn_writing_started")]
    CNWritingStarted,
    #[serde(rename = "cn_writing_finished")]
    CNWritingFinished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub session_id: String,
    pub operator_id: String,
    pub event_type: EventType,
    pub hate_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shown_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_text: Option<String>,
    #[serde(with = "millis_ts")]
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventError {
    #[error("{0:?} event requires final_text")]
    MissingFinalText(EventType),
    #[error("suggestion_modified event requires suggestion_id and shown_text")]
    MissingSuggestion,
    #[error("session {session}: timestamp goes backwards")]
    NonMonotone { session: String },
}

impl ActivityEvent {
    pub fn validate(&self) -> Result<(), EventError> {
        match self.event_type {
            EventType::SuggestionModified | EventType::NewCNSaved if self.final_text.is_none() => {
                return Err(EventError::MissingFinalText(self.event_type));
            }
            _ => {}
        }
        if self.event_type == EventType::SuggestionModified
            && (self.suggestion_id.is_none() || self.shown_text.is_none())
        {
            return Err(EventError::MissingSuggestion);
        }
        Ok(())
    }
}

/// Checks the per-session monotone timestamp rule over a whole log.
pub fn validate_event_order(events: &[ActivityEvent]) -> Result<(), EventError> {
    let mut last: BTreeMap<&str, DateTime<Utc>> = BTreeMap::new();
    for e in events {
        if let Some(prev) = last.get(e.session_id.as_str()) {
            if e.timestamp < *prev {
                return Err(EventError::NonMonotone { session: e.session_id.clone() });
            }
        }
        last.insert(&e.session_id, e.timestamp);
    }
    Ok(())
}

/// Truncates to whole milliseconds.
pub fn to_millis(ts: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(ts.timestamp_millis()).unwrap_or(ts)
}

/// Truncates to whole seconds.
pub fn to_seconds(ts: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp(ts.timestamp(), 0).unwrap_or(ts)
}

mod millis_ts {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        let ts = DateTime::parse_from_rfc3339(&raw).map_err(serde::de::Error::custom)?;
        Ok(super::to_millis(ts.with_timezone(&Utc)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn record() -> TweetRecord {
        TweetRecord {
            id: "1".into(),
            created_at: Utc.with_ymd_and_hms(2018, 10, 1, 0, 0, 0).unwrap(),
            text: "no to #BanIslam".into(),
            lang: "en".into(),
            author: "u1".into(),
            hashtags: vec!["banislam".into()],
            kind: MessageKind::Original,
            referenced_id: None,
            retweet_count: 0,
        }
    }

    #[test]
    fn well_formed_record_is_ok() {
        assert_eq!(validate_record(&record()), Ok(()));
    }

    #[test]
    fn retweet_without_reference() {
        let mut r = record();
        r.kind = MessageKind::Retweet;
        let v = validate_record(&r).unwrap_err();
        assert_eq!(v, vec![Violation::RetweetMissingReferencedId]);
        assert_eq!(v[0].to_string(), "retweet missing referenced_id");
    }

    #[test]
    fn uppercase_hashtag() {
        let mut r = record();
        r.hashtags = vec!["BanIslam".into()];
        let v = validate_record(&r).unwrap_err();
        assert!(v.iter().any(|x| x.to_string().starts_with("hashtag not lowercase")));
    }

    #[test]
    fn collects_every_violation() {
        let mut r = record();
        r.id = String::new();
        r.referenced_id = Some("2".into());
        r.hashtags = vec!["a".into(), "a".into(), String::new()];
        let v = validate_record(&r).unwrap_err();
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn word_boundaries() {
        assert!(contains_word("Stop Islamisation now", "islamisation"));
        assert!(!contains_word("islander life", "islam"));
        assert!(contains_word("islam.", "islam"));
        assert!(contains_word("no to #BanIslam", "banislam"));
        assert!(!contains_word("", "islam"));
        assert!(contains_word("l'islam èst", "islam"));
        assert!(!contains_word("islamophobia islamic", "islam"));
        assert!(contains_word("islamic islam", "islam"));
    }

    #[test]
    fn watchlist_rejects_duplicates_case_insensitively() {
        let t = |s: &str| WatchTerm { surface: s.into(), is_hashtag: true };
        assert!(Watchlist::new("en", vec![t("#BanIslam"), t("#banislam")]).is_err());
        assert!(Watchlist::new("en", vec![]).is_err());
        assert!(Watchlist::new("en", vec![t("#BanIslam")]).is_ok());
    }

    #[test]
    fn event_requires_fields() {
        let e = ActivityEvent {
            session_id: "s".into(),
            operator_id: "o".into(),
            event_type: EventType::SuggestionModified,
            hate_text: "h".into(),
            suggestion_id: None,
            shown_text: None,
            final_text: Some("f".into()),
            timestamp: Utc::now(),
        };
        assert_eq!(e.validate(), Err(EventError::MissingSuggestion));
    }

    #[test]
    fn event_json_uses_snake_case_names() {
        let e = ActivityEvent {
            session_id: "s".into(),
            operator_id: "o".into(),
            event_type: EventType::NewCNSaved,
            hate_text: "h".into(),
            suggestion_id: None,
            shown_text: None,
            final_text: Some("f".into()),
            timestamp: Utc.timestamp_millis_opt(1_540_000_000_123).unwrap(),
        };
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"event_type\":\"new_cn_saved\""));
        assert!(json.contains("\"timestamp\":\"2018-10-20T01:46:40.123Z\""));
    }

    #[test]
    fn graph_is_undirected_without_self_loops() {
        let mut g = WeightedGraph::new();
        g.add_weight("b", "a", 1.0);
        g.add_weight("a", "b", 2.0);
        g.add_weight("a", "a", 5.0);
        assert_eq!(g.weight("a", "b"), Some(3.0));
        assert_eq!(g.weight("b", "a"), Some(3.0));
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 2);
    }
}
