//! External model providers over HTTP/JSON, plus the recorded-table mask provider.
//!
//! Every external call has a timeout (2 s by default). Callers fall back to the
//! deterministic implementations when a provider errors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{Embedder, Vector};
use crate::text::normalize_label;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("{provider} provider unavailable: {reason}")]
    Unavailable {
        provider: &'static str,
        reason: String,
    },
}

impl ProviderError {
    pub fn unavailable(provider: &'static str, reason: impl ToString) -> Self {
        ProviderError::Unavailable {
            provider,
            reason: reason.to_string(),
        }
    }
}

/// Span reported by a named-entity provider, byte offsets into the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerSpan {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

pub trait NerProvider: Send + Sync {
    fn recognize(&self, text: &str) -> Result<Vec<NerSpan>, ProviderError>;
}

/// A text with one marked gap and the term that was masked out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedText<'a> {
    pub text: &'a str,
    pub mask_span: (usize, usize),
    pub term: &'a str,
}

pub trait MaskProvider: Send + Sync {
    /// Ranked substitute strings for the masked term.
    fn substitutes(&self, masked: &MaskedText<'_>, top_k: usize) -> Result<Vec<String>, ProviderError>;

    fn mode(&self) -> &'static str {
        "external"
    }
}

fn http_client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("HTTP client builds with static configuration")
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    url: &str,
    body: &Req,
    provider: &'static str,
) -> Result<Resp, ProviderError> {
    let resp = client
        .post(url)
        .json(body)
        .send()
        .map_err(|e| ProviderError::unavailable(provider, e))?;
    let status = resp.status();
    if !status.is_success() {
        return Err(ProviderError::unavailable(provider, format!("HTTP {status}")));
    }
    resp.json().map_err(|e| ProviderError::unavailable(provider, e))
}

/// `POST {base}/ner` with `{"text": ...}`.
pub struct HttpNerProvider {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpNerProvider {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpNerProvider {
            url: endpoint(base_url, "ner"),
            client: http_client(timeout),
        }
    }
}

#[derive(Serialize)]
struct NerRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct NerResponse {
    entities: Vec<NerSpan>,
}

impl NerProvider for HttpNerProvider {
    fn recognize(&self, text: &str) -> Result<Vec<NerSpan>, ProviderError> {
        let resp: NerResponse = post_json(&self.client, &self.url, &NerRequest { text }, "ner")?;
        for e in &resp.entities {
            if e.start > e.end || e.end > text.len() || !text.is_char_boundary(e.start) || !text.is_char_boundary(e.end) {
                return Err(ProviderError::unavailable("ner", format!("span {}..{} out of bounds", e.start, e.end)));
            }
        }
        Ok(resp.entities)
    }
}

/// `POST {base}/fill` with `{"text", "mask_span": [start, end], "top_k"}`.
pub struct HttpMaskProvider {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpMaskProvider {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpMaskProvider {
            url: endpoint(base_url, "fill"),
            client: http_client(timeout),
        }
    }
}

#[derive(Serialize)]
struct FillRequest<'a> {
    text: &'a str,
    mask_span: [usize; 2],
    top_k: usize,
}

#[derive(Deserialize)]
struct FillResponse {
    terms: Vec<String>,
}

impl MaskProvider for HttpMaskProvider {
    fn substitutes(&self, masked: &MaskedText<'_>, top_k: usize) -> Result<Vec<String>, ProviderError> {
        let body = FillRequest {
            text: masked.text,
            mask_span: [masked.mask_span.0, masked.mask_span.1],
            top_k,
        };
        let resp: FillResponse = post_json(&self.client, &self.url, &body, "mlm")?;
        Ok(resp.terms)
    }
}

/// Recorded substitutions keyed by normalized term, loaded from a JSON object
/// `{"term": ["substitute", ...]}`. Terms without an entry get no substitutes.
#[derive(Debug, Clone, Default)]
pub struct TableMaskProvider {
    table: HashMap<String, Vec<String>>,
}

impl TableMaskProvider {
    pub fn new(table: HashMap<String, Vec<String>>) -> Self {
        TableMaskProvider {
            table: table.into_iter().map(|(k, v)| (normalize_label(&k), v)).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, std::io::Error> {
        let raw = fs::read_to_string(path)?;
        let table: HashMap<String, Vec<String>> = serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::new(table))
    }
}

impl MaskProvider for TableMaskProvider {
    fn substitutes(&self, masked: &MaskedText<'_>, top_k: usize) -> Result<Vec<String>, ProviderError> {
        Ok(self
            .table
            .get(&normalize_label(masked.term))
            .map(|v| v.iter().take(top_k).cloned().collect())
            .unwrap_or_default())
    }

    fn mode(&self) -> &'static str {
        "recorded"
    }
}

/// `POST {base}/embed` with `{"texts": [...]}`. The dimension of the first
/// response is pinned; later responses with another dimension are rejected.
pub struct HttpEmbedder {
    url: String,
    client: reqwest::blocking::Client,
    dim: AtomicUsize,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpEmbedder {
            url: endpoint(base_url, "embed"),
            client: http_client(timeout),
            dim: AtomicUsize::new(0),
        }
    }

    /// Pinned dimension, or `None` before the first successful call.
    pub fn dimension(&self) -> Option<usize> {
        match self.dim.load(Ordering::Acquire) {
            0 => None,
            d => Some(d),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>, ProviderError> {
        let resp: EmbedResponse = post_json(&self.client, &self.url, &EmbedRequest { texts }, "embedding")?;
        if resp.vectors.len() != texts.len() {
            return Err(ProviderError::unavailable(
                "embedding",
                format!("expected {} vectors, got {}", texts.len(), resp.vectors.len()),
            ));
        }
        resp.vectors
            .into_iter()
            .map(|components| {
                let d = components.len();
                if d == 0 {
                    return Err(ProviderError::unavailable("embedding", "empty vector"));
                }
                if let Err(pinned) = self.dim.compare_exchange(0, d, Ordering::AcqRel, Ordering::Acquire) {
                    if pinned != d {
                        return Err(ProviderError::unavailable(
                            "embedding",
                            format!("dimension changed from {pinned} to {d}"),
                        ));
                    }
                }
                Vector::new(components).map_err(|e| ProviderError::unavailable("embedding", e))
            })
            .collect()
    }

    fn mode(&self) -> &'static str {
        "external"
    }
}

/// Uses `primary` until it fails once, then the fallback for the rest of the
/// process lifetime so vectors within a session keep one dimension.
pub struct FallbackEmbedder<P, F> {
    primary: P,
    fallback: F,
    tripped: std::sync::atomic::AtomicBool,
}

impl<P: Embedder, F: Embedder> FallbackEmbedder<P, F> {
    pub fn new(primary: P, fallback: F) -> Self {
        FallbackEmbedder {
            primary,
            fallback,
            tripped: std::sync::atomic::AtomicBool::new(false),
        }
    }

    pub fn is_tripped(&self) -> bool {
        self.tripped.load(Ordering::Acquire)
    }
}

impl<P: Embedder, F: Embedder> Embedder for FallbackEmbedder<P, F> {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>, ProviderError> {
        if !self.is_tripped() {
            match self.primary.embed_batch(texts) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("embedding provider failed, switching to fallback: {e}");
                    self.tripped.store(true, Ordering::Release);
                }
            }
        }
        self.fallback.embed_batch(texts)
    }

    fn mode(&self) -> &'static str {
        if self.is_tripped() {
            "fallback"
        } else {
            self.primary.mode()
        }
    }
}
