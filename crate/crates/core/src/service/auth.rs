//! Locally provisioned operator accounts and bearer session tokens.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

pub const ACCOUNTS_FILE: &str = "accounts.json";
const PBKDF2_ROUNDS: u32 = 100_000;
const MAX_FAILURES_PER_MINUTE: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("invalid operator id or secret")]
    BadCredentials,
    #[error("too many failed logins; retry later")]
    RateLimited,
    #[error("missing or malformed bearer token")]
    MissingToken,
    #[error("token expired or unknown")]
    InvalidToken,
    #[error("account store error: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Credential {
    salt: String,
    hash: String,
    #[serde(default = "default_rounds")]
    rounds: u32,
}

fn default_rounds() -> u32 {
    PBKDF2_ROUNDS
}

/// Operator credentials, stored as salted PBKDF2-SHA256 hashes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounts {
    operators: BTreeMap<String, Credential>,
}

fn derive(secret: &str, salt: &[u8], rounds: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(secret.as_bytes(), salt, rounds, &mut out);
    out
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

impl Accounts {
    pub fn path_in(root: &Path) -> PathBuf {
        root.join(ACCOUNTS_FILE)
    }

    /// Loads accounts from `root`; a missing file means no accounts.
    pub fn load(root: &Path) -> Result<Self, AuthError> {
        let path = Self::path_in(root);
        if !path.exists() {
            return Ok(Accounts::default());
        }
        let data = fs::read_to_string(&path).map_err(|e| AuthError::Store(e.to_string()))?;
        serde_json::from_str(&data).map_err(|e| AuthError::Store(e.to_string()))
    }

    pub fn save(&self, root: &Path) -> Result<(), AuthError> {
        let path = Self::path_in(root);
        let tmp = path.with_extension("tmp");
        let data = serde_json::to_vec_pretty(self).map_err(|e| AuthError::Store(e.to_string()))?;
        fs::write(&tmp, data).map_err(|e| AuthError::Store(e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| AuthError::Store(e.to_string()))
    }

    /// Adds or replaces an operator's secret.
    pub fn provision(&mut self, operator_id: &str, secret: &str) {
        self.provision_with_rounds(operator_id, secret, PBKDF2_ROUNDS);
    }

    /// As [`provision`](Self::provision) with an explicit PBKDF2 round count.
    pub fn provision_with_rounds(&mut self, operator_id: &str, secret: &str, rounds: u32) {
        let mut salt = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut salt);
        let rounds = rounds.max(1);
        let hash = derive(secret, &salt, rounds);
        self.operators.insert(
            operator_id.to_string(),
            Credential { salt: hex::encode(salt), hash: hex::encode(hash), rounds },
        );
    }

    pub fn verify(&self, operator_id: &str, secret: &str) -> bool {
        let Some(cred) = self.operators.get(operator_id) else {
            return false;
        };
        let (Ok(salt), Ok(expected)) = (hex::decode(&cred.salt), hex::decode(&cred.hash)) else {
            return false;
        };
        constant_time_eq(&derive(secret, &salt, cred.rounds), &expected)
    }

    pub fn operators(&self) -> impl Iterator<Item = &str> {
        self.operators.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub operator_id: String,
    pub session_id: String,
    pub token: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// In-memory token table with per-operator login throttling.
#[derive(Debug, Default)]
pub struct Sessions {
    tokens: HashMap<String, SessionToken>,
    failures: HashMap<String, VecDeque<DateTime<Utc>>>,
}

impl Sessions {
    pub fn login(
        &mut self,
        accounts: &Accounts,
        operator_id: &str,
        secret: &str,
        now: DateTime<Utc>,
        lifetime: Duration,
    ) -> Result<SessionToken, AuthError> {
        let window_start = now - Duration::minutes(1);
        let failures = self.failures.entry(operator_id.to_string()).or_default();
        while failures.front().is_some_and(|t| *t <= window_start) {
            failures.pop_front();
        }
        if failures.len() >= MAX_FAILURES_PER_MINUTE {
            return Err(AuthError::RateLimited);
        }
        if !accounts.verify(operator_id, secret) {
            failures.push_back(now);
            return Err(AuthError::BadCredentials);
        }
        let mut bytes = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let session = SessionToken {
            operator_id: operator_id.to_string(),
            session_id: format!("s-{}", &token[..16]),
            token: token.clone(),
            issued_at: now,
            expires_at: now + lifetime,
        };
        self.tokens.retain(|_, s| s.expires_at > now);
        self.tokens.insert(token, session.clone());
        Ok(session)
    }

    pub fn authorize(&self, token: &str, now: DateTime<Utc>) -> Result<SessionToken, AuthError> {
        match self.tokens.get(token) {
            Some(s) if s.expires_at > now => Ok(s.clone()),
            _ => Err(AuthError::InvalidToken),
        }
    }
}

/// Extracts the token from an `Authorization: Bearer <token>` header value.
pub fn bearer(header: Option<&str>) -> Result<&str, AuthError> {
    header
        .and_then(|h| h.strip_prefix("Bearer "))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or(AuthError::MissingToken)
}
