//! Search backends: an offline indexed corpus and a remote Entrez client.
//!
//! The offline corpus also defines the boolean semantics of the dialect:
//! title/abstract terms match contiguous token runs (prefix on the last token
//! for wildcards), heading terms match whole controlled-vocabulary entries.

mod entrez;
mod ratelimit;

pub use entrez::{EntrezClient, EntrezConfig};
pub use ratelimit::RateLimiter;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::ops::Bound;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::{BooleanQuery, FieldTag, TermPattern};
use crate::text::{normalize_label, token_strings};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    #[serde(rename = "pmid")]
    pub external_id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(rename = "mesh", default)]
    pub mesh_terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("backend rate limit exceeded after retries")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("could not decode backend response: {0}")]
    Decode(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed corpus line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("duplicate article id {0}")]
    DuplicateId(String),
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of a search call: the backend's total hit count and up to `limit` ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchHits {
    pub total: usize,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FetchOutcome {
    pub articles: Vec<Article>,
    /// Requested ids the backend could not resolve.
    pub missing: Vec<String>,
}

pub trait SearchBackend: Send + Sync {
    fn search(&self, query: &BooleanQuery, rendered: &str, limit: usize) -> Result<SearchHits, BackendError>;

    fn fetch(&self, ids: &[String]) -> Result<FetchOutcome, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Posting {
    doc: usize,
    positions: Vec<u32>,
}

/// Articles plus inverted indexes. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    articles: Vec<Article>,
    by_id: HashMap<String, usize>,
    tiab_index: BTreeMap<String, Vec<Posting>>,
    mesh_index: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    pub fn new(articles: Vec<Article>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::new();
        let mut tiab_index: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut mesh_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (doc, a) in articles.iter().enumerate() {
            if by_id.insert(a.external_id.clone(), doc).is_some() {
                return Err(CorpusError::DuplicateId(a.external_id.clone()));
            }
            let mut positions: BTreeMap<String, Vec<u32>> = BTreeMap::new();
            for (pos, tok) in tiab_positions(a) {
                positions.entry(tok).or_default().push(pos);
            }
            for (tok, positions) in positions {
                tiab_index.entry(tok).or_default().push(Posting { doc, positions });
            }
            let headings: BTreeSet<String> = a.mesh_terms.iter().map(|m| normalize_label(m)).collect();
            for h in headings {
                mesh_index.entry(h).or_default().push(doc);
            }
        }
        Ok(Corpus {
            articles,
            by_id,
            tiab_index,
            mesh_index,
        })
    }

    /// Reads `{"pmid", "title", "abstract", "mesh"}` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let content = fs::read_to_string(path)?;
        let mut articles = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let a: Article = serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
                line_no: idx + 1,
                reason: e.to_string(),
            })?;
            if a.external_id.trim().is_empty() || a.title.trim().is_empty() {
                return Err(CorpusError::MalformedLine {
                    line_no: idx + 1,
                    reason: "pmid and title must be non-empty".into(),
                });
            }
            articles.push(a);
        }
        Self::new(articles)
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.by_id.get(id).map(|&i| &self.articles[i])
    }

    /// Positions per document for one pattern token.
    fn token_positions(&self, token: &str, prefix: bool) -> BTreeMap<usize, Vec<u32>> {
        let mut out: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        if prefix {
            let range = self
                .tiab_index
                .range::<str, _>((Bound::Included(token), Bound::Unbounded))
                .take_while(|(k, _)| k.starts_with(token));
            for (_, postings) in range {
                for p in postings {
                    out.entry(p.doc).or_default().extend(&p.positions);
                }
            }
            for v in out.values_mut() {
                v.sort_unstable();
            }
        } else if let Some(postings) = self.tiab_index.get(token) {
            for p in postings {
                out.insert(p.doc, p.positions.clone());
            }
        }
        out
    }

    fn term_docs(&self, pattern: &TermPattern) -> BTreeSet<usize> {
        match pattern.tag() {
            FieldTag::Mesh => self
                .mesh_index
                .iter()
                .filter(|(heading, _)| pattern.matches_heading(heading))
                .flat_map(|(_, docs)| docs.iter().copied())
                .collect(),
            FieldTag::Tiab => {
                let tokens = pattern.tokens();
                if tokens.is_empty() {
                    return BTreeSet::new();
                }
                let last = tokens.len() - 1;
                let maps: Vec<BTreeMap<usize, Vec<u32>>> = tokens
                    .iter()
                    .enumerate()
                    .map(|(i, t)| self.token_positions(t, pattern.is_prefix() && i == last))
                    .collect();
                maps[0]
                    .iter()
                    .filter(|(doc, starts)| {
                        starts.iter().any(|&s| {
                            maps.iter().enumerate().skip(1).all(|(i, m)| {
                                m.get(doc)
                                    .is_some_and(|ps| ps.binary_search(&(s + i as u32)).is_ok())
                            })
                        })
                    })
                    .map(|(doc, _)| *doc)
                    .collect()
            }
        }
    }
}

/// Title tokens then abstract tokens, with a one-position gap between the
/// fields so phrases never straddle them.
fn tiab_positions(a: &Article) -> Vec<(u32, String)> {
    let title = token_strings(&a.title);
    let offset = title.len() as u32 + 1;
    let mut out: Vec<(u32, String)> = title.into_iter().enumerate().map(|(i, t)| (i as u32, t)).collect();
    out.extend(
        token_strings(&a.abstract_text)
            .into_iter()
            .enumerate()
            .map(|(i, t)| (offset + i as u32, t)),
    );
    out
}

/// Per-document reference semantics, independent of the index.
pub fn evaluate(query: &BooleanQuery, article: &Article) -> bool {
    let title = token_strings(&article.title);
    let abstract_tokens = token_strings(&article.abstract_text);
    query.groups().iter().all(|g| {
        g.terms().iter().any(|t| {
            let p = TermPattern::new(t);
            match t.tag() {
                FieldTag::Tiab => p.matches_tokens(&title) || p.matches_tokens(&abstract_tokens),
                FieldTag::Mesh => article.mesh_terms.iter().any(|m| p.matches_heading(m)),
            }
        })
    })
}

fn matching_docs(corpus: &Corpus, query: &BooleanQuery) -> Vec<usize> {
    let mut acc: Option<BTreeSet<usize>> = None;
    for g in query.groups() {
        let mut union = BTreeSet::new();
        for t in g.terms() {
            union.extend(corpus.term_docs(&TermPattern::new(t)));
        }
        acc = Some(match acc {
            None => union,
            Some(prev) => prev.intersection(&union).copied().collect(),
        });
        if acc.as_ref().is_some_and(BTreeSet::is_empty) {
            break;
        }
    }
    acc.unwrap_or_default().into_iter().collect()
}

/// Every article the query matches, in corpus order, using the indexes.
pub fn local_search<'a>(corpus: &'a Corpus, query: &BooleanQuery) -> Vec<&'a Article> {
    matching_docs(corpus, query)
        .into_iter()
        .map(|i| &corpus.articles[i])
        .collect()
}

/// [`SearchBackend`] over an in-memory corpus.
#[derive(Debug, Clone)]
pub struct LocalBackend {
    corpus: std::sync::Arc<Corpus>,
}

impl LocalBackend {
    pub fn new(corpus: std::sync::Arc<Corpus>) -> Self {
        LocalBackend { corpus }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }
}

impl SearchBackend for LocalBackend {
    fn search(&self, query: &BooleanQuery, _rendered: &str, limit: usize) -> Result<SearchHits, BackendError> {
        let docs = matching_docs(&self.corpus, query);
        Ok(SearchHits {
            total: docs.len(),
            ids: docs
                .into_iter()
                .take(limit)
                .map(|i| self.corpus.articles[i].external_id.clone())
                .collect(),
        })
    }

    fn fetch(&self, ids: &[String]) -> Result<FetchOutcome, BackendError> {
        let mut out = FetchOutcome::default();
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                continue;
            }
            match self.corpus.get(id) {
                Some(a) => out.articles.push(a.clone()),
                None => out.missing.push(id.clone()),
            }
        }
        Ok(out)
    }
}
