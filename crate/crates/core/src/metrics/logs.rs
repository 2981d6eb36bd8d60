use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{ActivityEvent, EventType};
use crate::retrieval::{cosine, vectorize_query, TermWeightVector, TfIdfIndex};

use super::hter::hter_text;
use super::MetricsError;

/// Average minutes an operator needs to write one counter-narrative from
/// scratch without suggestions, as measured in a separate unassisted session.
/// Reported for comparison with `mean_minutes_*`; never derived from logs.
pub const UNASSISTED_MINUTES_PER_CN: f64 = 8.0;

/// Aggregate figures over an activity log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub shown_count: u64,
    pub modified_count: u64,
    pub discarded_count: u64,
    pub new_count: u64,
    /// modified / (modified + new); absent when both are zero.
    pub accuracy: Option<f64>,
    pub mean_minutes_modified: Option<f64>,
    pub mean_minutes_new: Option<f64>,
    pub mean_cosine_modified: Option<f64>,
    pub mean_cosine_discarded: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub session_id: String,
    pub operator_id: String,
    pub shown: u64,
    pub modified: u64,
    pub discarded: u64,
    pub new: u64,
    pub writing_minutes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WritingClass {
    Modified,
    New,
}

#[derive(Default)]
struct SessionState {
    open: Option<(DateTime<Utc>, Option<WritingClass>)>,
    broken: bool,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Writing spans (`CNWritingStarted` .. `CNWritingFinished`) per session,
/// classified by whether a modification or a new CN was saved inside them.
fn writing_spans(events: &[ActivityEvent]) -> Result<Vec<(String, f64, Option<WritingClass>)>, MetricsError> {
    let mut sessions: BTreeMap<&str, SessionState> = BTreeMap::new();
    let mut spans = Vec::new();
    for e in events {
        let st = sessions.entry(e.session_id.as_str()).or_default();
        match e.event_type {
            EventType::CNWritingStarted => {
                if st.open.is_some() {
                    st.broken = true;
                }
                st.open = Some((e.timestamp, None));
            }
            EventType::CNWritingFinished => match st.open.take() {
                Some((start, class)) => {
                    let minutes = (e.timestamp - start).num_milliseconds() as f64 / 60_000.0;
                    spans.push((e.session_id.clone(), minutes, class));
                }
                None => st.broken = true,
            },
            EventType::SuggestionModified => {
                if let Some((_, class)) = st.open.as_mut() {
                    *class = Some(WritingClass::Modified);
                }
            }
            EventType::NewCNSaved => {
                if let Some((_, class)) = st.open.as_mut() {
                    *class = Some(WritingClass::New);
                }
            }
            _ => {}
        }
    }
    let bad: Vec<String> = sessions
        .into_iter()
        .filter(|(_, st)| st.broken || st.open.is_some())
        .map(|(s, _)| s.to_string())
        .collect();
    if !bad.is_empty() {
        return Err(MetricsError::MalformedLog { sessions: bad });
    }
    Ok(spans)
}

/// Counts, accuracy, writing times and relevance contrast over a log.
/// Cosine means need indexes; a suggestion is scored against the first
/// index holding its pair and left out when none does.
pub fn summarize_logs(events: &[ActivityEvent], indexes: &[&TfIdfIndex]) -> Result<LogSummary, MetricsError> {
    let spans = writing_spans(events)?;
    let count = |t: EventType| events.iter().filter(|e| e.event_type == t).count() as u64;
    let modified_count = count(EventType::SuggestionModified);
    let new_count = count(EventType::NewCNSaved);
    let accuracy = (modified_count + new_count > 0)
        .then(|| modified_count as f64 / (modified_count + new_count) as f64);

    let minutes = |class: WritingClass| -> Vec<f64> {
        spans.iter().filter(|(_, _, c)| *c == Some(class)).map(|(_, m, _)| *m).collect()
    };

    let relevance = |t: EventType| -> Option<f64> {
        let scores: Vec<f64> = events
            .iter()
            .filter(|e| e.event_type == t)
            .filter_map(|e| {
                let id = e.suggestion_id.as_deref()?;
                let (index, doc) = indexes.iter().find_map(|ix| ix.doc_vectors.get(id).map(|d| (*ix, d)))?;
                let query = vectorize_query(&e.hate_text, index).unwrap_or_else(|_| TermWeightVector::new());
                Some(cosine(&query, doc))
            })
            .collect();
        mean(&scores)
    };

    Ok(LogSummary {
        shown_count: count(EventType::SuggestionShown),
        modified_count,
        discarded_count: count(EventType::SuggestionDiscarded),
        new_count,
        accuracy,
        mean_minutes_modified: mean(&minutes(WritingClass::Modified)),
        mean_minutes_new: mean(&minutes(WritingClass::New)),
        mean_cosine_modified: relevance(EventType::SuggestionModified),
        mean_cosine_discarded: relevance(EventType::SuggestionDiscarded),
    })
}

/// Per-session counts and total writing time.
pub fn session_breakdown(events: &[ActivityEvent]) -> Result<Vec<SessionRow>, MetricsError> {
    let spans = writing_spans(events)?;
    let mut rows: BTreeMap<&str, SessionRow> = BTreeMap::new();
    for e in events {
        let row = rows.entry(e.session_id.as_str()).or_insert_with(|| SessionRow {
            session_id: e.session_id.clone(),
            operator_id: e.operator_id.clone(),
            shown: 0,
            modified: 0,
            discarded: 0,
            new: 0,
            writing_minutes: 0.0,
        });
        match e.event_type {
            EventType::SuggestionShown => row.shown += 1,
            EventType::SuggestionModified => row.modified += 1,
            EventType::SuggestionDiscarded => row.discarded += 1,
            EventType::NewCNSaved => row.new += 1,
            _ => {}
        }
    }
    for (session, minutes, _) in spans {
        if let Some(row) = rows.get_mut(session.as_str()) {
            row.writing_minutes += minutes;
        }
    }
    Ok(rows.into_values().collect())
}

pub fn sessions_csv(rows: &[SessionRow]) -> String {
    let mut out = String::from("session_id,operator_id,shown,modified,discarded,new,writing_minutes\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.session_id),
            csv_field(&r.operator_id),
            r.shown,
            r.modified,
            r.discarded,
            r.new,
            r.writing_minutes
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Mean HTER over all `SuggestionModified` events.
pub fn mean_hter(events: &[ActivityEvent]) -> Result<f64, MetricsError> {
    let rates = events
        .iter()
        .filter(|e| e.event_type == EventType::SuggestionModified)
        .map(|e| {
            hter_text(e.shown_text.as_deref().unwrap_or_default(), e.final_text.as_deref().unwrap_or_default())
                .map(|r| r.hter)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    mean(&rates).ok_or(MetricsError::NoData)
}
