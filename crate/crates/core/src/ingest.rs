//! JSONL ingestion: parsing, message-kind classification, watchlist filtering
//! and persistence with per-language summary counts.
//!
//! Input schema, one JSON object per line:
//!
//! | field           | type            | required |
//! |-----------------|-----------------|----------|
//! | `id`            | string / number | yes      |
//! | `created_at`    | RFC 3339        | yes      |
//! | `text`          | string          | yes      |
//! | `lang`          | string          | no (`und`) |
//! | `author`        | string          | no       |
//! | `hashtags`      | string[]        | no       |
//! | `referenced_id` | string / number | no       |
//! | `kind`          | `original` / `reply` / `retweet` | no |
//! | `retweet_count` | integer         | no       |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    contains_word, is_word_char, normalize_term, to_seconds, validate_record, MessageKind, TweetRecord, Violation,
    Watchlist,
};
use crate::store::{StoreError, StoreHandle, WriteBatch};

const BATCH_SIZE: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("ambiguous kind: both reply and retweet markers present")]
    AmbiguousKind,
    #[error("invalid record: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read source {path}: {reason}")]
    Source { path: PathBuf, reason: String },
    #[error("live sources are not available in this build")]
    LiveUnsupported,
    #[error("storage failure after partial ingest: {source}")]
    Storage {
        stats: IngestStats,
        #[source]
        source: StoreError,
    },
}

/// Resolves the message kind from reply / retweet markers.
pub fn classify_kind(has_reply_marker: bool, has_retweet_marker: bool) -> Result<MessageKind, ParseError> {
    match (has_reply_marker, has_retweet_marker) {
        (true, true) => Err(ParseError::AmbiguousKind),
        (_, true) => Ok(MessageKind::Retweet),
        (true, false) => Ok(MessageKind::Reply),
        (false, false) => Ok(MessageKind::Original),
    }
}

fn id_like(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Hashtags found in free text: '#' followed by one or more word characters.
pub fn hashtags_in_text(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '#' {
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while let Some(&(j, d)) = chars.peek() {
            if is_word_char(d) {
                end = j + d.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        if end > start {
            out.push(text[start..end].to_lowercase());
        }
    }
    out
}

/// Parses one JSONL line into a normalized record.
pub fn parse_record(line: &str) -> Result<TweetRecord, ParseError> {
    let value: Value = serde_json::from_str(line).map_err(|e| ParseError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| ParseError::Schema("line is not a JSON object".into()))?;
    let field = |name: &str| obj.get(name).filter(|v| !v.is_null());

    let id = field("id")
        .and_then(id_like)
        .ok_or_else(|| ParseError::Schema("missing id".into()))?;
    let raw_ts = field("created_at")
        .and_then(Value::as_str)
        .ok_or_else(|| ParseError::Schema("missing created_at".into()))?;
    let created_at = DateTime::parse_from_rfc3339(raw_ts)
        .map(|t| to_seconds(t.with_timezone(&Utc)))
        .map_err(|e| ParseError::Schema(format!("bad created_at '{raw_ts}': {e}")))?;
    let text = field("text")
        .and_then(Value::as_str)
        .ok_or_else(|| ParseError::Schema("missing text".into()))?
        .to_string();
    let lang = field("lang").and_then(Value::as_str).unwrap_or("und").to_string();
    let author = field("author").and_then(Value::as_str).unwrap_or_default().to_string();
    let referenced_id = field("referenced_id").and_then(id_like);
    let retweet_count = match field("retweet_count") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ParseError::Schema("retweet_count must be a non-negative integer".into()))?,
    };

    let kind_field = match field("kind") {
        None => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| ParseError::Schema("kind must be a string".into()))?
                .to_ascii_lowercase(),
        ),
    };
    let (reply, retweet) = match kind_field.as_deref() {
        None | Some("original") => (false, false),
        Some("reply") => (true, false),
        Some("retweet") => (false, true),
        Some(other) => return Err(ParseError::Schema(format!("unknown kind '{other}'"))),
    };
    let kind = classify_kind(reply, retweet)?;

    let mut hashtags: Vec<String> = Vec::new();
    let explicit = match field("hashtags") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(normalize_term).ok_or_else(|| ParseError::Schema("hashtags must be strings".into())))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(ParseError::Schema("hashtags must be an array".into())),
    };
    for tag in explicit.into_iter().chain(hashtags_in_text(&text)) {
        if !tag.is_empty() && !hashtags.contains(&tag) {
            hashtags.push(tag);
        }
    }

    let record = TweetRecord { id, created_at, text, lang, author, hashtags, kind, referenced_id, retweet_count };
    validate_record(&record).map_err(ParseError::Invalid)?;
    Ok(record)
}

/// True iff a watchlist hashtag is among the record's hashtags, or a keyword
/// occurs in the text at word boundaries (case-insensitive).
pub fn matches_watchlist(record: &TweetRecord, wl: &Watchlist) -> bool {
    if wl.language != record.lang {
        return false;
    }
    wl.terms.iter().any(|t| {
        let norm = t.normalized();
        if t.is_hashtag {
            record.hashtags.contains(&norm)
        } else {
            contains_word(&record.text, &norm)
        }
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub original: u64,
    pub replies: u64,
    pub retweets: u64,
    pub total: u64,
}

impl KindCounts {
    pub fn add(&mut self, kind: MessageKind) {
        match kind {
            MessageKind::Original => self.original += 1,
            MessageKind::Reply => self.replies += 1,
            MessageKind::Retweet => self.retweets += 1,
        }
        self.total += 1;
    }
}

/// Per-language message-kind counts for matched records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub languages: BTreeMap<String, KindCounts>,
    pub parse_errors: u64,
    pub rejected_no_match: u64,
    /// Matched records already present in the store (counted in `languages`).
    pub duplicates: u64,
    /// Matched records newly written by this run.
    pub stored: u64,
}

impl IngestStats {
    pub fn totals(&self) -> KindCounts {
        self.languages.values().fold(KindCounts::default(), |mut acc, c| {
            acc.original += c.original;
            acc.replies += c.replies;
            acc.retweets += c.retweets;
            acc.total += c.total;
            acc
        })
    }

    /// Non-blank input lines accounted for.
    pub fn lines_seen(&self) -> u64 {
        self.totals().total + self.rejected_no_match + self.parse_errors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    FileReplay,
    LiveAdapterStub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub kind: SourceKind,
    pub location: String,
    #[serde(default)]
    pub rate_limit: Option<f64>,
}

impl SourceDescriptor {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        SourceDescriptor {
            kind: SourceKind::FileReplay,
            location: path.into().to_string_lossy().into_owned(),
            rate_limit: None,
        }
    }
}

/// A source of raw JSONL lines.
pub trait LineSource {
    fn next_line(&mut self) -> Option<Result<String, IngestError>>;
}

struct FileReplay {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    interval: Option<std::time::Duration>,
}

impl LineSource for FileReplay {
    fn next_line(&mut self) -> Option<Result<String, IngestError>> {
        if let Some(d) = self.interval {
            std::thread::sleep(d);
        }
        self.lines.next().map(|r| {
            r.map_err(|e| IngestError::Source { path: self.path.clone(), reason: e.to_string() })
        })
    }
}

/// Placeholder for a credentialed live-API adapter.
pub struct LiveAdapterStub;

impl LineSource for LiveAdapterStub {
    fn next_line(&mut self) -> Option<Result<String, IngestError>> {
        Some(Err(IngestError::LiveUnsupported))
    }
}

/// Opens the line source described by `source`.
pub fn open_source(source: &SourceDescriptor) -> Result<Box<dyn LineSource>, IngestError> {
    match source.kind {
        SourceKind::FileReplay => {
            let path = PathBuf::from(&source.location);
            let f = File::open(&path).map_err(|e| IngestError::Source { path: path.clone(), reason: e.to_string() })?;
            let interval = source
                .rate_limit
                .filter(|r| *r > 0.0)
                .map(|r| std::time::Duration::from_secs_f64(1.0 / r));
            Ok(Box::new(FileReplay { path, lines: BufReader::new(f).lines(), interval }))
        }
        SourceKind::LiveAdapterStub => Err(IngestError::LiveUnsupported),
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Only keep records in this language.
    pub language: Option<String>,
}

/// Reads `source`, keeps records matching a watchlist of their language, and
/// stores them (deduplicated by id). Blank lines are skipped and not counted.
pub fn ingest(
    source: &SourceDescriptor,
    watchlists: &[Watchlist],
    store: &StoreHandle,
    opts: &IngestOptions,
) -> Result<IngestStats, IngestError> {
    let mut lines = open_source(source)?;
    ingest_lines(lines.as_mut(), watchlists, store, opts)
}

pub fn ingest_lines(
    lines: &mut dyn LineSource,
    watchlists: &[Watchlist],
    store: &StoreHandle,
    opts: &IngestOptions,
) -> Result<IngestStats, IngestError> {
    let mut stats = IngestStats::default();
    let mut pending: Vec<TweetRecord> = Vec::new();

    let flush = |pending: &mut Vec<TweetRecord>, stats: &mut IngestStats| -> Result<(), IngestError> {
        if pending.is_empty() {
            return Ok(());
        }
        let batch = WriteBatch { tweets: std::mem::take(pending), ..Default::default() };
        match store.commit(batch) {
            Ok(out) => {
                stats.stored += out.tweets_written as u64;
                stats.duplicates += out.tweets_duplicate as u64;
                Ok(())
            }
            Err(source) => Err(IngestError::Storage { stats: stats.clone(), source }),
        }
    };

    while let Some(line) = lines.next_line() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = match parse_record(&line) {
            Ok(r) => r,
            Err(_) => {
                stats.parse_errors += 1;
                continue;
            }
        };
        let lang_ok = opts.language.as_ref().is_none_or(|l| *l == record.lang);
        let matched = lang_ok && watchlists.iter().any(|wl| matches_watchlist(&record, wl));
        if !matched {
            stats.rejected_no_match += 1;
            continue;
        }
        stats.languages.entry(record.lang.clone()).or_default().add(record.kind);
        pending.push(record);
        if pending.len() >= BATCH_SIZE {
            flush(&mut pending, &mut stats)?;
        }
    }
    flush(&mut pending, &mut stats)?;
    Ok(stats)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WatchlistFile {
    One(Watchlist),
    Many(Vec<Watchlist>),
}

/// Reads a watchlist file holding one `{language, terms}` object or an
/// array of them.
pub fn load_watchlists(path: impl AsRef<Path>) -> Result<Vec<Watchlist>, IngestError> {
    let path = path.as_ref();
    let err = |reason: String| IngestError::Source { path: path.to_path_buf(), reason };
    let data = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let lists = match serde_json::from_str(&data).map_err(|e| err(e.to_string()))? {
        WatchlistFile::One(wl) => vec![wl],
        WatchlistFile::Many(v) => v,
    };
    for wl in &lists {
        wl.validate().map_err(|e| err(e.to_string()))?;
    }
    Ok(lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WatchTerm;

    const LINE: &str = r#"{"id":"1","created_at":"2018-10-01T00:00:00Z","text":"no to #BanIslam","lang":"en","author":"u1"}"#;

    #[test]
    fn parses_minimal_record() {
        let r = parse_record(LINE).unwrap();
        assert_eq!(r.hashtags, ["banislam"]);
        assert_eq!(r.kind, MessageKind::Original);
        assert_eq!(r.author, "u1");
        assert_eq!(r.created_at.to_rfc3339(), "2018-10-01T00:00:00+00:00");
    }

    #[test]
    fn parses_retweet() {
        let line = r#"{"id":"1","created_at":"2018-10-01T00:00:00Z","text":"no to #BanIslam","lang":"en","author":"u1","referenced_id":"9","kind":"retweet"}"#;
        let r = parse_record(line).unwrap();
        assert_eq!(r.kind, MessageKind::Retweet);
        assert_eq!(r.referenced_id.as_deref(), Some("9"));
    }

    #[test]
    fn malformed_and_schema_errors() {
        assert!(matches!(parse_record("{not json"), Err(ParseError::Json(_))));
        assert!(matches!(parse_record(r#"{"id":"1","text":"x"}"#), Err(ParseError::Schema(_))));
        assert!(matches!(
            parse_record(r#"{"created_at":"2018-10-01T00:00:00Z","text":"x"}"#),
            Err(ParseError::Schema(_))
        ));
        let bad_kind = r#"{"id":"1","created_at":"2018-10-01T00:00:00Z","text":"x","kind":"quote"}"#;
        assert!(matches!(parse_record(bad_kind), Err(ParseError::Schema(_))));
        let rt_no_ref = r#"{"id":"1","created_at":"2018-10-01T00:00:00Z","text":"x","kind":"retweet"}"#;
        assert!(matches!(parse_record(rt_no_ref), Err(ParseError::Invalid(_))));
    }

    #[test]
    fn timestamps_normalized_to_utc() {
        let line = r#"{"id":7,"created_at":"2018-10-01T01:30:00.900+02:00","text":"x"}"#;
        let r = parse_record(line).unwrap();
        assert_eq!(r.id, "7");
        assert_eq!(r.created_at.to_rfc3339(), "2018-09-30T23:30:00+00:00");
        assert_eq!(r.lang, "und");
    }

    #[test]
    fn hashtags_unioned_and_deduplicated() {
        let line = r##"{"id":"1","created_at":"2018-10-01T00:00:00Z","text":"#StopIslam and #banislam, #x_y!","hashtags":["#BanIslam","Other"]}"##;
        let r = parse_record(line).unwrap();
        assert_eq!(r.hashtags, ["banislam", "other", "stopislam", "x_y"]);
    }

    #[test]
    fn kind_classification() {
        assert_eq!(classify_kind(false, true).unwrap(), MessageKind::Retweet);
        assert_eq!(classify_kind(true, false).unwrap(), MessageKind::Reply);
        assert_eq!(classify_kind(false, false).unwrap(), MessageKind::Original);
        assert!(matches!(classify_kind(true, true), Err(ParseError::AmbiguousKind)));
    }

    #[test]
    fn watchlist_matching() {
        let kw = Watchlist {
            language: "en".into(),
            terms: vec![WatchTerm { surface: "islamisation".into(), is_hashtag: false }],
        };
        let mut r = parse_record(LINE).unwrap();
        r.text = "stop islamisation".into();
        assert!(matches_watchlist(&r, &kw));

        let tag = Watchlist {
            language: "en".into(),
            terms: vec![WatchTerm { surface: "banislam".into(), is_hashtag: true }],
        };
        let r = parse_record(LINE).unwrap();
        assert!(matches_watchlist(&r, &tag));

        let islam = Watchlist {
            language: "en".into(),
            terms: vec![WatchTerm { surface: "Islam".into(), is_hashtag: false }],
        };
        let mut r = parse_record(LINE).unwrap();
        r.text = "islander life".into();
        assert!(!matches_watchlist(&r, &islam));

        let mut fr = parse_record(LINE).unwrap();
        fr.lang = "fr".into();
        assert!(!matches_watchlist(&fr, &tag));
    }

    #[test]
    fn live_stub_is_unavailable() {
        let src = SourceDescriptor { kind: SourceKind::LiveAdapterStub, location: "https://example".into(), rate_limit: None };
        assert!(matches!(open_source(&src), Err(IngestError::LiveUnsupported)));
        let missing = SourceDescriptor::file("/nonexistent/feed.jsonl");
        assert!(matches!(open_source(&missing), Err(IngestError::Source { .. })));
    }
}
