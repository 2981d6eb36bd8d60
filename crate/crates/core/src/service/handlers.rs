use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::response::Response;
use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analytics::{
    cooccurrence_graph, daily_counts, default_range, detect_peaks, louvain_cancellable, most_connected_users, popular_messages,
    to_export, top_recent_terms, user_activity_series, user_graph, AnalyticsError, GraphExport, TrendWindow,
    DEFAULT_RECENT_TERMS,
};
use crate::metrics::{session_breakdown, summarize_logs, LogSummary, MetricsError, SessionRow};
use crate::model::{to_millis, ActivityEvent, CnPair, DateRange, EventType, PairOrigin, TweetRecord, WeightedGraph};
use crate::retrieval::{new_pair, suggest_in, Suggestion};
use crate::store::{Snapshot, WriteBatch};

use super::auth::{bearer, SessionToken};
use super::{envelope, ApiError, AppState};

const DEFAULT_TOP_K: usize = 10;

type Params = Query<HashMap<String, String>>;

/// The authenticated operator behind a request.
pub struct Operator(pub SessionToken);

#[axum::async_trait]
impl FromRequestParts<AppState> for Operator {
    type Rejection = Response;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Response> {
        let header = parts.headers.get(AUTHORIZATION).and_then(|v| v.to_str().ok());
        let authorized = bearer(header).and_then(|token| {
            let sessions = state.inner.sessions.lock().unwrap_or_else(|e| e.into_inner());
            sessions.authorize(token, state.now())
        });
        authorized
            .map(Operator)
            .map_err(|e| envelope::<()>(state.versions(state.store().version()), Err(e.into())))
    }
}

fn parse_param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key) {
        None => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|_| ApiError::bad_request(format!("invalid {key}: '{v}'"))),
    }
}

fn required(q: &HashMap<String, String>, key: &str) -> Result<String, ApiError> {
    q.get(key)
        .filter(|v| !v.trim().is_empty())
        .cloned()
        .ok_or_else(|| ApiError::bad_request(format!("missing {key}")))
}

fn positive(value: Option<usize>, default: usize, key: &str) -> Result<usize, ApiError> {
    match value.unwrap_or(default) {
        0 => Err(ApiError::bad_request(format!("{key} must be at least 1"))),
        k => Ok(k),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

/// The requested day range. Missing bounds default to the ten days ending at
/// the latest stored record (or today on an empty store).
fn date_range(state: &AppState, tweets: &[TweetRecord], q: &HashMap<String, String>) -> Result<DateRange, ApiError> {
    let from: Option<NaiveDate> = parse_param(q, "from")?;
    let to: Option<NaiveDate> = parse_param(q, "to")?;
    default_range(tweets, from, to, state.now().date_naive()).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn read<T: Serialize>(state: &AppState, f: impl FnOnce(&Snapshot) -> Result<T, ApiError>) -> Response {
    let snap = state.store().snapshot();
    let result = f(&snap);
    envelope(state.versions(snap.version()), result)
}

fn analytics_error(e: AnalyticsError) -> ApiError {
    match e {
        AnalyticsError::InsufficientData { .. } => ApiError::unprocessable("insufficient_data", e.to_string()),
        other => ApiError::internal(other.to_string()),
    }
}

struct CancelOnDrop(Arc<AtomicBool>);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.store(true, Ordering::Release);
    }
}

/// Graph export with Louvain communities, computed off the async runtime
/// and abandoned if the request goes away.
async fn with_communities(graph: WeightedGraph, seed: u64) -> Result<GraphExport, ApiError> {
    let flag = Arc::new(AtomicBool::new(false));
    let _guard = CancelOnDrop(flag.clone());
    tokio::task::spawn_blocking(move || {
        let partition = louvain_cancellable(&graph, seed, &flag).map_err(|_| ApiError::internal("cancelled"))?;
        Ok(to_export(&graph, Some(&partition)))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

pub async fn health(State(state): State<AppState>) -> Response {
    envelope(state.versions(state.store().version()), Ok(json!({ "status": "ok" })))
}

pub async fn not_found(State(state): State<AppState>) -> Response {
    envelope::<()>(state.versions(state.store().version()), Err(ApiError::not_found("no such endpoint")))
}

#[derive(Deserialize)]
struct LoginRequest {
    operator_id: String,
    secret: String,
}

pub async fn login(State(state): State<AppState>, body: Bytes) -> Response {
    let result = parse_body::<LoginRequest>(&body).and_then(|req| {
        let lifetime = Duration::seconds(state.config().token_lifetime_secs);
        let mut sessions = state.inner.sessions.lock().unwrap_or_else(|e| e.into_inner());
        Ok(sessions.login(&state.inner.accounts, &req.operator_id, &req.secret, state.now(), lifetime)?)
    });
    envelope(state.versions(state.store().version()), result)
}

pub async fn trends_recent(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    read(&state, |snap| {
        let k = positive(parse_param(&q, "k")?, DEFAULT_RECENT_TERMS, "k")?;
        let now: DateTime<Utc> = parse_param(&q, "now")?.unwrap_or_else(|| state.now());
        Ok(top_recent_terms(snap.tweets()?, state.watchlists(), now, k))
    })
}

pub async fn trends_series(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    read(&state, |snap| {
        let tweets = snap.tweets()?;
        let term = required(&q, "term")?;
        Ok(daily_counts(tweets, &term, date_range(&state, tweets, &q)?))
    })
}

pub async fn trends_peaks(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    read(&state, |snap| {
        let tweets = snap.tweets()?;
        let term = required(&q, "term")?;
        let counts = daily_counts(tweets, &term, date_range(&state, tweets, &q)?);
        detect_peaks(&counts.series).map_err(analytics_error)
    })
}

pub async fn network_hashtags(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    let snap = state.store().snapshot();
    let graph = (|| {
        let tweets = snap.tweets()?;
        let term = required(&q, "term")?;
        let range = date_range(&state, tweets, &q)?;
        let min_weight: u32 = parse_param(&q, "min_weight")?.unwrap_or(1);
        let window = TrendWindow::new(&term, range.start, range.end).map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok::<_, ApiError>(cooccurrence_graph(tweets, &window, min_weight))
    })();
    let result = match graph {
        Ok(g) => with_communities(g, state.config().seed).await,
        Err(e) => Err(e),
    };
    envelope(state.versions(snap.version()), result)
}

pub async fn network_users(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    let snap = state.store().snapshot();
    let graph = (|| {
        let tweets = snap.tweets()?;
        Ok::<_, ApiError>(user_graph(tweets, date_range(&state, tweets, &q)?))
    })();
    let result = match graph {
        Ok(g) => with_communities(g, state.config().seed).await,
        Err(e) => Err(e),
    };
    envelope(state.versions(snap.version()), result)
}

pub async fn users_top(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    read(&state, |snap| {
        let tweets = snap.tweets()?;
        let k = positive(parse_param(&q, "k")?, DEFAULT_TOP_K, "k")?;
        Ok(most_connected_users(&user_graph(tweets, date_range(&state, tweets, &q)?), k))
    })
}

pub async fn user_series(
    State(state): State<AppState>,
    _op: Operator,
    Path(user): Path<String>,
    Query(q): Params,
) -> Response {
    read(&state, |snap| {
        let tweets = snap.tweets()?;
        Ok(user_activity_series(tweets, &user, date_range(&state, tweets, &q)?))
    })
}

pub async fn messages_popular(State(state): State<AppState>, _op: Operator, Query(q): Params) -> Response {
    read(&state, |snap| {
        let tweets = snap.tweets()?;
        let term = required(&q, "term")?;
        let k = positive(parse_param(&q, "k")?, DEFAULT_TOP_K, "k")?;
        Ok(popular_messages(tweets, &term, date_range(&state, tweets, &q)?, k))
    })
}

/// Appends events (and pairs) for one session in a single batch. Server
/// stamped events are clamped so a session's timestamps never go backwards;
/// with `strict` a client timestamp that goes backwards is rejected instead.
fn append(
    state: &AppState,
    session: &SessionToken,
    pairs: Vec<CnPair>,
    mut events: Vec<ActivityEvent>,
    strict: bool,
) -> Result<(u64, Vec<ActivityEvent>), ApiError> {
    let mut clock = state.inner.event_clock.lock().unwrap_or_else(|e| e.into_inner());
    let mut last = clock.get(&session.session_id).copied();
    for e in &mut events {
        e.timestamp = to_millis(e.timestamp);
        if let Some(prev) = last {
            if e.timestamp < prev {
                if strict {
                    return Err(ApiError::unprocessable(
                        "non_monotone",
                        format!("timestamp precedes the session's last event ({})", prev.to_rfc3339()),
                    ));
                }
                e.timestamp = prev;
            }
        }
        last = Some(e.timestamp);
    }
    let outcome = state.store().commit(WriteBatch { tweets: Vec::new(), pairs, events: events.clone() })?;
    if let Some(ts) = last {
        clock.insert(session.session_id.clone(), ts);
    }
    Ok((outcome.version, events))
}

fn event(session: &SessionToken, event_type: EventType, hate_text: &str, now: DateTime<Utc>) -> ActivityEvent {
    ActivityEvent {
        session_id: session.session_id.clone(),
        operator_id: session.operator_id.clone(),
        event_type,
        hate_text: hate_text.to_string(),
        suggestion_id: None,
        shown_text: None,
        final_text: None,
        timestamp: now,
    }
}

#[derive(Deserialize)]
struct SuggestRequest {
    text: Option<String>,
    tweet_id: Option<String>,
    k: Option<usize>,
    lang: Option<String>,
}

pub async fn cn_suggest(State(state): State<AppState>, Operator(session): Operator, body: Bytes) -> Response {
    let snap = state.store().snapshot();
    let result = (|| {
        let req: SuggestRequest = parse_body(&body)?;
        let (text, tweet_lang) = match (req.text, req.tweet_id) {
            (Some(text), None) => (text, None),
            (None, Some(id)) => {
                let tweet = snap
                    .tweets()?
                    .iter()
                    .find(|t| t.id == id)
                    .ok_or_else(|| ApiError::not_found(format!("no stored record '{id}'")))?;
                (tweet.text.clone(), Some(tweet.lang.clone()))
            }
            _ => return Err(ApiError::bad_request("give exactly one of text or tweet_id")),
        };
        let lang = req.lang.or(tweet_lang).unwrap_or_else(|| state.config().languages[0].clone());
        let indexes = state.indexes();
        let index = indexes
            .by_language
            .get(&lang)
            .ok_or_else(|| ApiError::not_found(format!("no index for language '{lang}'")))?;
        let suggestions: Vec<Suggestion> = suggest_in(&lang, &text, index, req.k.unwrap_or(state.config().default_k))?;
        let now = state.now();
        let events = suggestions
            .iter()
            .map(|s| ActivityEvent {
                suggestion_id: Some(s.pair_id.clone()),
                shown_text: Some(s.counter_text.clone()),
                ..event(&session, EventType::SuggestionShown, &text, now)
            })
            .collect();
        let (version, _) = append(&state, &session, Vec::new(), events, false)?;
        Ok((version, suggestions))
    })();
    match result {
        Ok((version, suggestions)) => envelope(state.versions(version), Ok(suggestions)),
        Err(e) => envelope::<()>(state.versions(snap.version()), Err(e)),
    }
}

#[derive(Deserialize)]
struct SaveRequest {
    hate_text: String,
    counter_text: String,
    origin: Option<PairOrigin>,
    lang: Option<String>,
    /// Set when the counter-narrative is an edited suggestion.
    suggestion_id: Option<String>,
    shown_text: Option<String>,
}

#[derive(Serialize)]
struct SaveResponse {
    pair_id: String,
    event_type: EventType,
}

pub async fn cn_save(State(state): State<AppState>, Operator(session): Operator, body: Bytes) -> Response {
    let before = state.store().version();
    let result = (|| {
        let req: SaveRequest = parse_body(&body)?;
        let lang = req.lang.unwrap_or_else(|| state.config().languages[0].clone());
        let modified = req.suggestion_id.is_some();
        let origin = req.origin.unwrap_or(if modified { PairOrigin::OperatorModified } else { PairOrigin::OperatorNew });
        let now = state.now();
        let pair = new_pair(&lang, &req.hate_text, &req.counter_text, origin, now);
        pair.validate(&state.config().languages).map_err(|e| ApiError::unprocessable("invalid_pair", e.to_string()))?;

        let mut ev = event(&session, if modified { EventType::SuggestionModified } else { EventType::NewCNSaved }, &req.hate_text, now);
        ev.final_text = Some(req.counter_text.clone());
        if let Some(id) = req.suggestion_id {
            let shown = match req.shown_text {
                Some(s) => s,
                None => state
                    .indexes()
                    .by_language
                    .values()
                    .find_map(|ix| ix.counter_texts.get(&id).cloned())
                    .ok_or_else(|| ApiError::unprocessable("invalid_request", format!("unknown suggestion '{id}'; send shown_text")))?,
            };
            ev.suggestion_id = Some(id);
            ev.shown_text = Some(shown);
        }
        let event_type = ev.event_type;
        let pair_id = pair.id.clone();
        let (version, _) = append(&state, &session, vec![pair], vec![ev], false)?;
        Ok((version, SaveResponse { pair_id, event_type }))
    })();
    match result {
        Ok((version, data)) => envelope(state.versions(version), Ok(data)),
        Err(e) => envelope::<()>(state.versions(before), Err(e)),
    }
}

pub async fn cn_reindex(State(state): State<AppState>, _op: Operator) -> Response {
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || worker.reindex())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
        .and_then(|r| r.map_err(|e| ApiError::internal(e.to_string())))
        .map(|set| {
            json!({
                "index_version": set.generation,
                "languages": set.by_language.iter().map(|(l, ix)| json!({ "language": l, "documents": ix.doc_count })).collect::<Vec<_>>(),
            })
        });
    envelope(state.versions(state.store().version()), result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRequest {
    event_type: EventType,
    hate_text: String,
    suggestion_id: Option<String>,
    shown_text: Option<String>,
    final_text: Option<String>,
    /// Server time is used when absent.
    timestamp: Option<DateTime<Utc>>,
    // Accepted for convenience; always replaced by the token's identity.
    #[allow(dead_code)]
    session_id: Option<String>,
    #[allow(dead_code)]
    operator_id: Option<String>,
}

pub async fn post_event(State(state): State<AppState>, Operator(session): Operator, body: Bytes) -> Response {
    let before = state.store().version();
    let result = (|| {
        let req: EventRequest = parse_body(&body)?;
        let strict = req.timestamp.is_some();
        let ev = ActivityEvent {
            suggestion_id: req.suggestion_id,
            shown_text: req.shown_text,
            final_text: req.final_text,
            ..event(&session, req.event_type, &req.hate_text, req.timestamp.unwrap_or_else(|| state.now()))
        };
        ev.validate().map_err(|e| ApiError::unprocessable("invalid_event", e.to_string()))?;
        let (version, mut stored) = append(&state, &session, Vec::new(), vec![ev], strict)?;
        Ok((version, stored.remove(0)))
    })();
    match result {
        Ok((version, ev)) => envelope(state.versions(version), Ok(ev)),
        Err(e) => envelope::<()>(state.versions(before), Err(e)),
    }
}

/// Payload of `GET /reports/logs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReport {
    pub summary: LogSummary,
    pub sessions: Vec<SessionRow>,
}

pub async fn reports_logs(State(state): State<AppState>, _op: Operator) -> Response {
    read(&state, |snap| {
        let events = snap.events()?;
        let set = state.indexes();
        let indexes: Vec<&crate::retrieval::TfIdfIndex> = set.by_language.values().map(|ix| ix.as_ref()).collect();
        let metrics_error = |e: MetricsError| ApiError::unprocessable("malformed_log", e.to_string());
        Ok(LogReport {
            summary: summarize_logs(events, &indexes).map_err(metrics_error)?,
            sessions: session_breakdown(events).map_err(metrics_error)?,
        })
    })
}
