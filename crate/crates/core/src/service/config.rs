use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::DEFAULT_LANGUAGES;
use crate::retrieval::{DEFAULT_K, MAX_K};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Service settings. Loaded from TOML, then overridden by `HATEWATCH_*`
/// environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub token_lifetime_secs: i64,
    pub default_k: usize,
    pub languages: Vec<String>,
    /// Louvain seed for network endpoints.
    pub seed: u64,
    /// Watchlist files; the built-in example hashtags are used when empty.
    pub watchlists: Vec<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            token_lifetime_secs: 12 * 3600,
            default_k: DEFAULT_K,
            languages: DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            watchlists: Vec::new(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(data: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(data).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given (defaults otherwise) and applies the process
    /// environment. Relative watchlist paths resolve against the config file.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let data = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::Read { path: p.to_path_buf(), reason: e.to_string() })?;
                let mut cfg = Self::from_toml(&data)?;
                let base = p.parent().unwrap_or(Path::new("."));
                for w in &mut cfg.watchlists {
                    if w.is_relative() {
                        *w = base.join(&*w);
                    }
                }
                cfg
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{key}={v}")))
        }
        if let Some(v) = var("HATEWATCH_BIND") {
            self.bind = v;
        }
        if let Some(v) = var("HATEWATCH_PORT") {
            self.port = parse("HATEWATCH_PORT", &v)?;
        }
        if let Some(v) = var("HATEWATCH_TOKEN_LIFETIME_SECS") {
            self.token_lifetime_secs = parse("HATEWATCH_TOKEN_LIFETIME_SECS", &v)?;
        }
        if let Some(v) = var("HATEWATCH_DEFAULT_K") {
            self.default_k = parse("HATEWATCH_DEFAULT_K", &v)?;
        }
        if let Some(v) = var("HATEWATCH_LANGUAGES") {
            self.languages = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=MAX_K).contains(&self.default_k) {
            return Err(ConfigError::Invalid(format!("default_k must be in 1..={MAX_K}")));
        }
        if self.token_lifetime_secs <= 0 {
            return Err(ConfigError::Invalid("token_lifetime_secs must be positive".into()));
        }
        if self.languages.is_empty() {
            return Err(ConfigError::Invalid("language set is empty".into()));
        }
        Ok(())
    }
}
