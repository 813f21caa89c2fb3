//! Text embedding, cosine similarity and semantic re-ranking.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::SentinelArticle;
use crate::providers::ProviderError;
use crate::query::{FieldTag, TaggedTerm, TermPattern};
use crate::retrieval::Article;
use crate::text::{char_offset, tokenize};

/// Dimension of the hashed bag-of-words fallback.
pub const FALLBACK_DIM: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector component is not finite")]
    NonFinite,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbedError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Vector(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Vector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Vector(self.0.iter().map(|x| x / n).collect())
    }
}

/// Standard cosine; a zero vector on either side gives 0.0.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Normalized mean of the inputs. Zero when every input is zero.
pub fn centroid(vectors: &[Vector]) -> Result<Vector, EmbedError> {
    let Some(first) = vectors.first() else {
        return Ok(Vector::zeros(0));
    };
    let dim = first.dim();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(EmbedError::DimensionMismatch {
                left: dim,
                right: v.dim(),
            });
        }
        for (s, x) in sum.iter_mut().zip(&v.0) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    Ok(Vector(sum.into_iter().map(|s| s / n).collect()).normalized())
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>, ProviderError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }

    /// `"external"` or `"fallback"`, reported by the health endpoint.
    fn mode(&self) -> &'static str;
}

/// Deterministic fallback: FNV-1a 64 of each lowercased token selects one of
/// 256 buckets, counts accumulate, and the result is L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashedBagEmbedder;

impl HashedBagEmbedder {
    pub fn bucket(token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % FALLBACK_DIM as u64) as usize
    }

    pub fn embed_text(text: &str) -> Vector {
        let mut counts = vec![0.0; FALLBACK_DIM];
        for tok in tokenize(text) {
            counts[Self::bucket(&tok.text)] += 1.0;
        }
        Vector(counts).normalized()
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for HashedBagEmbedder {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        Ok(Self::embed_text(text))
    }

    fn mode(&self) -> &'static str {
        "fallback"
    }
}

/// In-memory id → vector store. Batch inserts take the write lock once.
#[derive(Debug, Default)]
pub struct VectorStore {
    vectors: RwLock<HashMap<String, Vector>>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_batch(&self, items: impl IntoIterator<Item = (String, Vector)>) {
        let mut guard = self.vectors.write().expect("vector store lock poisoned");
        guard.extend(items);
    }

    pub fn get(&self, id: &str) -> Option<Vector> {
        self.vectors.read().expect("vector store lock poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.vectors.read().expect("vector store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArticle {
    pub article: Article,
    /// Percent similarity rounded to two decimals.
    pub score_percent: f64,
    /// Character spans `(start, end)` in the abstract, sorted and disjoint.
    pub highlights: Vec<(usize, usize)>,
}

impl RankedArticle {
    pub fn display_score(&self) -> String {
        format!("{:.2}", self.score_percent)
    }
}

pub fn article_text(title: &str, abstract_text: &str) -> String {
    format!("{title} {abstract_text}").trim().to_string()
}

/// Similarity mapped to a percent: negatives clamp to zero, two decimals.
pub fn score_percent(similarity: f64) -> f64 {
    (100.0 * similarity.max(0.0) * 100.0).round() / 100.0
}

/// Reference vector for the query plus sentinel articles.
pub fn reference_vector(
    query: &str,
    sentinels: &[SentinelArticle],
    embedder: &dyn Embedder,
) -> Result<Vector, EmbedError> {
    let mut texts = vec![query.to_string()];
    texts.extend(sentinels.iter().map(|s| article_text(&s.title, &s.abstract_text)));
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    centroid(&embedder.embed_batch(&refs)?)
}

/// Scores articles against the query + sentinel centroid and keeps the top `k`.
///
/// Ordering is by score descending, then external id ascending. Duplicate ids
/// keep their first occurrence. Highlights mark where the title/abstract terms of
/// `highlight_terms` occur in each abstract.
pub fn rerank(
    articles: &[Article],
    query: &str,
    sentinels: &[SentinelArticle],
    k: usize,
    embedder: &dyn Embedder,
    highlight_terms: &[TaggedTerm],
) -> Result<Vec<RankedArticle>, EmbedError> {
    let reference = reference_vector(query, sentinels, embedder)?;

    let mut seen = HashSet::new();
    let unique: Vec<&Article> = articles
        .iter()
        .filter(|a| seen.insert(a.external_id.as_str()))
        .collect();

    let store = VectorStore::new();
    let embedded: Vec<(String, Vector)> = unique
        .par_iter()
        .map(|a| {
            embedder
                .embed(&article_text(&a.title, &a.abstract_text))
                .map(|v| (a.external_id.clone(), v))
        })
        .collect::<Result<_, _>>()?;
    store.insert_batch(embedded);

    let patterns: Vec<TermPattern> = highlight_terms
        .iter()
        .filter(|t| t.tag() == FieldTag::Tiab)
        .map(TermPattern::new)
        .collect();

    let mut ranked = unique
        .into_iter()
        .map(|a| {
            let v = store.get(&a.external_id).expect("embedded above");
            Ok(RankedArticle {
                article: a.clone(),
                score_percent: score_percent(cosine(&v, &reference)?),
                highlights: highlight_spans(&a.abstract_text, &patterns),
            })
        })
        .collect::<Result<Vec<_>, EmbedError>>()?;

    ranked.sort_by(|a, b| {
        b.score_percent
            .partial_cmp(&a.score_percent)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.article.external_id.cmp(&b.article.external_id))
    });
    ranked.truncate(k);
    Ok(ranked)
}

/// Character spans of every pattern occurrence, merged where they overlap.
pub fn highlight_spans(text: &str, patterns: &[TermPattern]) -> Vec<(usize, usize)> {
    let tokens = tokenize(text);
    let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for p in patterns {
        let n = p.tokens().len();
        for start in p.occurrences(&words) {
            let first = &tokens[start];
            let last = &tokens[start + n - 1];
            spans.push((
                char_offset(text, first.span.start),
                char_offset(text, last.span.end),
            ));
        }
    }
    spans.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_text_embeds_to_zero() {
        let v = HashedBagEmbedder::embed_text("");
        assert_eq!(v.dim(), FALLBACK_DIM);
        assert!(v.is_zero());
    }

    #[test]
    fn fallback_vectors_are_unit() {
        for text in ["catgut sutures", "a", "Gender affirming surgeries"] {
            assert_abs_diff_eq!(HashedBagEmbedder::embed_text(text).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cosine_conventions() {
        let e1 = Vector::new(vec![1.0, 0.0]).unwrap();
        let e2 = Vector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cosine(&e1, &e1).unwrap(), 1.0);
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        assert_eq!(cosine(&e1, &Vector::zeros(2)).unwrap(), 0.0);
        assert!(matches!(
            cosine(&e1, &Vector::zeros(3)),
            Err(EmbedError::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(Vector::new(vec![f64::NAN]).unwrap_err(), EmbedError::NonFinite);
    }

    #[test]
    fn centroid_of_one_is_itself() {
        let v = HashedBagEmbedder::embed_text("wound infections");
        let c = centroid(std::slice::from_ref(&v)).unwrap();
        for (a, b) in c.as_slice().iter().zip(v.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn percent_rounding_and_clamp() {
        assert_eq!(score_percent(0.814_349), 81.43);
        assert_eq!(score_percent(-0.3), 0.0);
        assert_eq!(score_percent(1.0), 100.0);
    }

    #[test]
    fn highlight_spans_merge_and_use_chars() {
        let text = "Ünïcode gender-affirming surgeries, gender care";
        let pats = vec![
            TermPattern::new(&TaggedTerm::wildcard("gender", FieldTag::Tiab).unwrap()),
            TermPattern::new(&TaggedTerm::quoted("gender affirming", FieldTag::Tiab).unwrap()),
        ];
        let spans = highlight_spans(text, &pats);
        assert_eq!(spans, vec![(8, 24), (36, 42)]);
        let chars: Vec<char> = text.chars().collect();
        let s: String = chars[8..24].iter().collect();
        assert_eq!(s, "gender-affirming");
    }

    #[test]
    fn vector_store_batch() {
        let store = VectorStore::new();
        store.insert_batch([("a".to_string(), Vector::zeros(2))]);
        assert_eq!(store.len(), 1);
        assert!(store.get("b").is_none());
    }
}
