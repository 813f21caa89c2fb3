//! Per-entity expansion: graph neighbours filtered by semantic similarity to
//! the search context, and substitutes from a masked-term provider.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine, EmbedError, Embedder, Vector};
use crate::extract::{Entity, SentinelArticle};
use crate::kg::ConceptGraph;
use crate::providers::{MaskProvider, MaskedText};
use crate::query::FieldTag;
use crate::text::normalize_label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpandError {
    #[error("no entities to expand")]
    NoEntities,
    #[error("semantic threshold {0} outside [-1, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub semantic_threshold: f64,
    pub max_mask_terms: usize,
    pub max_hops: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            semantic_threshold: 0.5,
            max_mask_terms: 3,
            max_hops: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgTerm {
    pub label: String,
    pub tag: FieldTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionEntry {
    pub entity: Entity,
    pub kg_terms: Vec<KgTerm>,
    pub mask_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSet {
    pub entries: Vec<ExpansionEntry>,
    pub context_embedding: Vector,
}

/// Labels of concepts within `max_hops` of the entity's concept whose
/// embedding is at least `threshold` cosine-similar to `context`, most
/// similar first. Unresolved entities get nothing.
pub fn vocabulary_extension(
    entity: &Entity,
    graph: &ConceptGraph,
    embedder: &dyn Embedder,
    context: &Vector,
    threshold: f64,
    max_hops: usize,
) -> Result<Vec<KgTerm>, ExpandError> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(ExpandError::InvalidThreshold(threshold));
    }
    let Some(concept_id) = entity.concept_id.as_deref() else {
        return Ok(Vec::new());
    };
    let Ok(neighbors) = graph.neighbors(concept_id, max_hops) else {
        return Ok(Vec::new());
    };

    let own = entity.normalized_surface();
    let mut seen = HashSet::from([own]);
    let candidates: Vec<KgTerm> = neighbors
        .iter()
        .flat_map(|c| {
            c.labels().map(|l| KgTerm {
                label: l.to_string(),
                tag: c.field_tag_hint,
            })
        })
        .filter(|t| seen.insert(normalize_label(&t.label)))
        .collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    let texts: Vec<&str> = candidates.iter().map(|t| t.label.as_str()).collect();
    let vectors = embedder.embed_batch(&texts).map_err(EmbedError::from)?;
    let mut scored = Vec::with_capacity(candidates.len());
    for (term, v) in candidates.into_iter().zip(vectors) {
        let sim = cosine(&v, context)?;
        if sim >= threshold {
            scored.push((sim, term));
        }
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.label.cmp(&b.1.label))
    });
    Ok(scored.into_iter().map(|(_, t)| t).collect())
}

/// Locates the term in the context case-insensitively, or prefixes it when
/// it does not occur, so the provider always receives one marked gap.
fn masked_context(term: &str, context_text: &str) -> (String, (usize, usize)) {
    let lower = context_text.to_lowercase();
    let needle = term.to_lowercase();
    if lower.len() == context_text.len() {
        if let Some(pos) = lower.find(&needle) {
            return (context_text.to_string(), (pos, pos + term.len()));
        }
    }
    (format!("{term}. {context_text}"), (0, term.len()))
}

/// Up to `max_terms` substitutes for the entity, never equal to its surface.
///
/// An external provider is tried first; on error, or when none is given, the
/// concept's synonyms are used in declared order. Unresolved entities without
/// a working provider get nothing.
pub fn mask_substitutes(
    entity: &Entity,
    context_text: &str,
    graph: &ConceptGraph,
    provider: Option<&dyn MaskProvider>,
    max_terms: usize,
) -> Vec<String> {
    if max_terms == 0 {
        return Vec::new();
    }
    let from_provider = provider.and_then(|p| {
        let (text, span) = masked_context(&entity.surface, context_text);
        let masked = MaskedText {
            text: &text,
            mask_span: span,
            term: &entity.surface,
        };
        // Ask for a few extra so filtering still leaves max_terms.
        match p.substitutes(&masked, max_terms + 2) {
            Ok(terms) => Some(terms),
            Err(e) => {
                log::warn!("{e}; using graph synonyms");
                None
            }
        }
    });
    let raw = from_provider.unwrap_or_else(|| {
        entity
            .concept_id
            .as_deref()
            .and_then(|id| graph.concept(id))
            .map(|c| c.synonyms.clone())
            .unwrap_or_default()
    });

    let mut seen = HashSet::from([entity.normalized_surface()]);
    raw.into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty() && seen.insert(normalize_label(t)))
        .take(max_terms)
        .collect()
}

/// Expands every entity against the query + sentinel context.
///
/// The context embedding is the normalized mean of the query embedding and one
/// embedding per sentinel (title and abstract). Entries keep entity order.
pub fn build_expansion(
    entities: &[Entity],
    graph: &ConceptGraph,
    embedder: &dyn Embedder,
    mask_provider: Option<&dyn MaskProvider>,
    query: &str,
    sentinels: &[SentinelArticle],
    config: &ExpansionConfig,
) -> Result<ExpansionSet, ExpandError> {
    if entities.is_empty() {
        return Err(ExpandError::NoEntities);
    }
    let context_embedding =
        crate::embed::reference_vector(query, sentinels, embedder)?;
    let mut context_text = query.to_string();
    for s in sentinels {
        context_text.push('\n');
        context_text.push_str(&s.text());
    }

    let entries = entities
        .par_iter()
        .map(|entity| {
            let kg_terms = vocabulary_extension(
                entity,
                graph,
                embedder,
                &context_embedding,
                config.semantic_threshold,
                config.max_hops,
            )?;
            let mask_terms = mask_substitutes(
                entity,
                &context_text,
                graph,
                mask_provider,
                config.max_mask_terms,
            );
            Ok(ExpansionEntry {
                entity: entity.clone(),
                kg_terms,
                mask_terms,
            })
        })
        .collect::<Result<Vec<_>, ExpandError>>()?;

    Ok(ExpansionSet {
        entries,
        context_embedding,
    })
}
