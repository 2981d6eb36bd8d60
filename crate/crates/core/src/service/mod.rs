//! Authenticated HTTP/JSON API over the store, analytics, retrieval and
//! activity log.
//!
//! Every response body is an envelope
//! `{snapshot_version, index_version, index_stale, data}`; errors replace
//! `data` with `error: {code, message}`. Reads run against one store
//! snapshot per request. Only pairs and activity events are ever written.

pub mod auth;
mod config;
mod handlers;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::model::{CnPair, Watchlist};
use crate::retrieval::{build_index, RetrievalError, TfIdfIndex};
use crate::store::{StoreError, StoreHandle};

pub use auth::{Accounts, AuthError, SessionToken, Sessions};
pub use config::{ConfigError, ServiceConfig};

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("watchlist error: {0}")]
    Watchlist(String),
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Error returned by a handler, rendered inside the response envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        let (status, code) = match e {
            AuthError::BadCredentials => (StatusCode::UNAUTHORIZED, "bad_credentials"),
            AuthError::RateLimited => (StatusCode::TOO_MANY_REQUESTS, "rate_limited"),
            AuthError::MissingToken => (StatusCode::UNAUTHORIZED, "missing_token"),
            AuthError::InvalidToken => (StatusCode::UNAUTHORIZED, "invalid_token"),
            AuthError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicatePair { .. } => ApiError::new(StatusCode::CONFLICT, "duplicate_pair", e.to_string()),
            StoreError::Closed => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "store_closed", e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::UnindexableQuery => ApiError::unprocessable("unindexable_query", e.to_string()),
            RetrievalError::InvalidK(_) | RetrievalError::InvalidPair(_) | RetrievalError::LanguageMismatch { .. } => {
                ApiError::unprocessable("invalid_request", e.to_string())
            }
            RetrievalError::EmptyCorpus(_) => ApiError::not_found(e.to_string()),
            RetrievalError::Duplicate(_) => ApiError::new(StatusCode::CONFLICT, "duplicate_pair", e.to_string()),
            RetrievalError::Store(s) => s.into(),
            other => ApiError::internal(other.to_string()),
        }
    }
}

/// Versions reported with every response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Versions {
    pub snapshot_version: u64,
    pub index_version: u64,
    pub index_stale: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<&'a T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorBody<'a>>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

pub(crate) fn envelope<T: Serialize>(versions: Versions, result: Result<T, ApiError>) -> Response {
    match result {
        Ok(data) => Json(Envelope { versions, data: Some(&data), error: None }).into_response(),
        Err(e) => {
            let body = Envelope::<()> {
                versions,
                data: None,
                error: Some(ErrorBody { code: e.code, message: &e.message }),
            };
            (e.status, Json(body)).into_response()
        }
    }
}

/// The set of live per-language indexes. Replaced wholesale on rebuild.
#[derive(Debug, Clone, Default)]
pub struct IndexSet {
    /// Bumped on every swap; 0 before any index is installed.
    pub generation: u64,
    pub by_language: BTreeMap<String, Arc<TfIdfIndex>>,
}

impl IndexSet {
    pub fn is_stale(&self, pairs_version: u64) -> bool {
        self.by_language.values().any(|ix| ix.is_stale(pairs_version))
    }
}

struct Inner {
    config: ServiceConfig,
    store: StoreHandle,
    indexes: RwLock<Arc<IndexSet>>,
    base_pairs: Vec<CnPair>,
    accounts: Accounts,
    sessions: Mutex<Sessions>,
    /// Last event timestamp per session; the lock also serializes appends.
    event_clock: Mutex<HashMap<String, DateTime<Utc>>>,
    watchlists: Vec<Watchlist>,
    clock: Clock,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

/// Assembles an [`AppState`].
pub struct ServiceBuilder {
    config: ServiceConfig,
    store: StoreHandle,
    indexes: Vec<TfIdfIndex>,
    base_pairs: Vec<CnPair>,
    accounts: Option<Accounts>,
    watchlists: Option<Vec<Watchlist>>,
    clock: Clock,
}

impl ServiceBuilder {
    /// Prebuilt indexes (e.g. loaded artifacts). When none are given the
    /// service builds them from the base pairs and the stored pairs.
    pub fn indexes(mut self, indexes: Vec<TfIdfIndex>) -> Self {
        self.indexes = indexes;
        self
    }

    /// Seed corpus merged with stored pairs on every rebuild.
    pub fn base_pairs(mut self, pairs: Vec<CnPair>) -> Self {
        self.base_pairs = pairs;
        self
    }

    /// Defaults to the accounts file in the store root.
    pub fn accounts(mut self, accounts: Accounts) -> Self {
        self.accounts = Some(accounts);
        self
    }

    /// Defaults to the configured watchlist files, or the example hashtags.
    pub fn watchlists(mut self, watchlists: Vec<Watchlist>) -> Self {
        self.watchlists = Some(watchlists);
        self
    }

    pub fn clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn build(self) -> Result<AppState, ServiceError> {
        self.config.validate()?;
        let accounts = match self.accounts {
            Some(a) => a,
            None => Accounts::load(self.store.root())?,
        };
        let watchlists = match self.watchlists {
            Some(w) => w,
            None if self.config.watchlists.is_empty() => Watchlist::example_hashtags(),
            None => {
                let mut all = Vec::new();
                for p in &self.config.watchlists {
                    all.extend(
                        crate::ingest::load_watchlists(p).map_err(|e| ServiceError::Watchlist(e.to_string()))?,
                    );
                }
                all
            }
        };
        let prebuilt = !self.indexes.is_empty();
        let by_language: BTreeMap<String, Arc<TfIdfIndex>> =
            self.indexes.into_iter().map(|ix| (ix.language.clone(), Arc::new(ix))).collect();
        let generation = u64::from(!by_language.is_empty());
        let state = AppState {
            inner: Arc::new(Inner {
                config: self.config,
                store: self.store,
                indexes: RwLock::new(Arc::new(IndexSet { generation, by_language })),
                base_pairs: self.base_pairs,
                accounts,
                sessions: Mutex::new(Sessions::default()),
                event_clock: Mutex::new(HashMap::new()),
                watchlists,
                clock: self.clock,
            }),
        };
        if !prebuilt {
            state.reindex()?;
        }
        Ok(state)
    }
}

impl AppState {
    pub fn builder(config: ServiceConfig, store: StoreHandle) -> ServiceBuilder {
        ServiceBuilder {
            config,
            store,
            indexes: Vec::new(),
            base_pairs: Vec::new(),
            accounts: None,
            watchlists: None,
            clock: Arc::new(Utc::now),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn store(&self) -> &StoreHandle {
        &self.inner.store
    }

    pub fn watchlists(&self) -> &[Watchlist] {
        &self.inner.watchlists
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.inner.clock)()
    }

    pub fn indexes(&self) -> Arc<IndexSet> {
        self.inner.indexes.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn versions(&self, snapshot_version: u64) -> Versions {
        let ix = self.indexes();
        Versions {
            snapshot_version,
            index_version: ix.generation,
            index_stale: ix.is_stale(self.inner.store.pairs_version()),
        }
    }

    /// Rebuilds every configured language from base and stored pairs, then
    /// swaps the whole set in at once. Languages without pairs get no index.
    pub fn reindex(&self) -> Result<Arc<IndexSet>, ServiceError> {
        let snap = self.inner.store.snapshot();
        let stored = snap.pairs()?;
        let mut corpus: Vec<CnPair> = self.inner.base_pairs.clone();
        let mut seen: std::collections::HashSet<(String, String, String)> = corpus
            .iter()
            .map(|p| (p.language.clone(), p.hate_text.clone(), p.counter_text.clone()))
            .collect();
        for p in stored {
            if seen.insert((p.language.clone(), p.hate_text.clone(), p.counter_text.clone())) {
                corpus.push(p.clone());
            }
        }
        let mut by_language = BTreeMap::new();
        for lang in &self.inner.config.languages {
            match build_index(&corpus, lang) {
                Ok(ix) => {
                    by_language.insert(lang.clone(), Arc::new(ix.with_source_version(snap.pairs_version())));
                }
                Err(RetrievalError::EmptyCorpus(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let mut guard = self.inner.indexes.write().unwrap_or_else(|e| e.into_inner());
        let next = Arc::new(IndexSet { generation: guard.generation + 1, by_language });
        *guard = next.clone();
        Ok(next)
    }

    pub fn router(&self) -> Router {
        router(self.clone())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(handlers::health))
        .route("/auth/login", post(handlers::login))
        .route("/trends/recent", get(handlers::trends_recent))
        .route("/trends/series", get(handlers::trends_series))
        .route("/trends/peaks", get(handlers::trends_peaks))
        .route("/network/hashtags", get(handlers::network_hashtags))
        .route("/network/users", get(handlers::network_users))
        .route("/users/top", get(handlers::users_top))
        .route("/users/:id/series", get(handlers::user_series))
        .route("/messages/popular", get(handlers::messages_popular))
        .route("/cn/suggest", post(handlers::cn_suggest))
        .route("/cn/save", post(handlers::cn_save))
        .route("/cn/reindex", post(handlers::cn_reindex))
        .route("/events", post(handlers::post_event))
        .route("/reports/logs", get(handlers::reports_logs))
        .fallback(handlers::not_found)
        .with_state(state)
}

/// Binds `addr` and serves until `shutdown` resolves.
pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Bind { addr: addr.to_string(), reason: e.to_string() })?;
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
