//! TOML service configuration with `SRSEARCH_*` environment overrides.
//!
//! Relative paths in the file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expand::ExpansionConfig;
use crate::retrieval::EntrezConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {var}={value:?} is not valid")]
    Env { var: &'static str, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub ner_url: Option<String>,
    pub mlm_url: Option<String>,
    pub embedding_url: Option<String>,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub k: usize,
    pub n_min: usize,
    /// Most ids taken from a search and fetched for reranking.
    pub retmax: usize,
    pub semantic_threshold: f64,
    pub max_mask_terms: usize,
    pub max_hops: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let exp = ExpansionConfig::default();
        SearchConfig {
            k: 5,
            n_min: 20,
            retmax: 100,
            semantic_threshold: exp.semantic_threshold,
            max_mask_terms: exp.max_mask_terms,
            max_hops: exp.max_hops,
        }
    }
}

impl SearchConfig {
    pub fn expansion(&self) -> ExpansionConfig {
        ExpansionConfig {
            semantic_threshold: self.semantic_threshold,
            max_mask_terms: self.max_mask_terms,
            max_hops: self.max_hops,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Concept graph JSONL.
    pub graph: PathBuf,
    /// Where `sessions.jsonl` and `feedback.jsonl` live.
    pub data_dir: PathBuf,
    /// Recorded masked-substitution table used when no `mlm_url` is set.
    pub mask_table: Option<PathBuf>,
    pub providers: ProviderConfig,
    pub entrez: EntrezConfig,
    pub search: SearchConfig,
    pub server: ServerConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            graph: PathBuf::from("graph.jsonl"),
            data_dir: PathBuf::from("data"),
            mask_table: None,
            providers: ProviderConfig::default(),
            entrez: EntrezConfig::default(),
            search: SearchConfig::default(),
            server: ServerConfig::default(),
        }
    }
}

fn parse_env<T: FromStr>(var: &'static str, value: String) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env { var, value })
}

impl Config {
    /// Reads the file, resolves its relative paths and applies process
    /// environment overrides. Paths from the environment are taken as given.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, |k| std::env::var(k).ok())
    }

    pub fn load_with_env(
        path: impl AsRef<Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&raw)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.apply_env(env)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(raw: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(raw)?)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.graph);
        join(&mut self.data_dir);
        if let Some(m) = self.mask_table.as_mut() {
            join(m);
        }
    }

    /// Overrides from `SRSEARCH_*` variables. An empty provider URL
    /// variable switches that provider back to its fallback.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let url = |v: String| {
            let v = v.trim().to_string();
            (!v.is_empty()).then_some(v)
        };
        if let Some(v) = env("SRSEARCH_GRAPH") {
            self.graph = v.into();
        }
        if let Some(v) = env("SRSEARCH_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = env("SRSEARCH_MASK_TABLE") {
            self.mask_table = url(v).map(PathBuf::from);
        }
        if let Some(v) = env("SRSEARCH_NER_URL") {
            self.providers.ner_url = url(v);
        }
        if let Some(v) = env("SRSEARCH_MLM_URL") {
            self.providers.mlm_url = url(v);
        }
        if let Some(v) = env("SRSEARCH_EMBEDDING_URL") {
            self.providers.embedding_url = url(v);
        }
        if let Some(v) = env("SRSEARCH_ENTREZ_BASE_URL") {
            self.entrez.base_url = v;
        }
        if let Some(v) = env("SRSEARCH_ENTREZ_API_KEY") {
            self.entrez.api_key = url(v);
        }
        if let Some(v) = env("SRSEARCH_RATE_LIMIT") {
            self.entrez.requests_per_second = parse_env("SRSEARCH_RATE_LIMIT", v)?;
        }
        if let Some(v) = env("SRSEARCH_K") {
            self.search.k = parse_env("SRSEARCH_K", v)?;
        }
        if let Some(v) = env("SRSEARCH_N_MIN") {
            self.search.n_min = parse_env("SRSEARCH_N_MIN", v)?;
        }
        if let Some(v) = env("SRSEARCH_RETMAX") {
            self.search.retmax = parse_env("SRSEARCH_RETMAX", v)?;
        }
        if let Some(v) = env("SRSEARCH_SEMANTIC_THRESHOLD") {
            self.search.semantic_threshold = parse_env("SRSEARCH_SEMANTIC_THRESHOLD", v)?;
        }
        if let Some(v) = env("SRSEARCH_BIND") {
            self.server.bind = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.search;
        if s.k == 0 || s.n_min == 0 || s.retmax == 0 {
            return Err(ConfigError::Invalid("search.k, search.n_min and search.retmax must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&s.semantic_threshold) {
            return Err(ConfigError::Invalid("search.semantic_threshold must be within [-1, 1]".into()));
        }
        Ok(())
    }
}
