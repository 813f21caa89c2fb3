//! Key-term extraction from the research question and sentinel articles.
//!
//! The built-in matcher scans word tokens left to right and takes the longest
//! token window whose text is a graph label. Tokens left over become
//! unresolved entities unless they are stopwords or look like verb/adverb
//! inflections. A [`NerProvider`] can replace the span detection.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::kg::ConceptGraph;
use crate::providers::NerProvider;
use crate::text::{normalize_label, tokenize};

const STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Origin {
    Query,
    Sentinel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub surface: String,
    pub concept_id: Option<String>,
    pub origin: Origin,
    /// In [0, 1]; 1.0 until scored.
    pub relevance: f64,
}

impl Entity {
    pub fn new(surface: impl Into<String>, concept_id: Option<String>, origin: Origin) -> Self {
        Entity {
            surface: surface.into(),
            concept_id,
            origin,
            relevance: 1.0,
        }
    }

    pub fn normalized_surface(&self) -> String {
        normalize_label(&self.surface)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelArticle {
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

impl SentinelArticle {
    pub fn text(&self) -> String {
        crate::embed::article_text(&self.title, &self.abstract_text)
    }
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token.to_lowercase().as_str())
}

/// Lowercased token that may name a thing: not a stopword, has a letter,
/// and is not a long `-ing`/`-ed`/`-ly` form.
fn is_noun_like(token: &str) -> bool {
    if token.chars().count() < 2 || is_stopword(token) || !token.chars().any(char::is_alphabetic) {
        return false;
    }
    let inflected = ["ing", "ed", "ly"].iter().any(|s| token.ends_with(s));
    !(inflected && token.chars().count() >= 6)
}

/// Entities with their byte spans in `text`, in text order.
pub fn extract_entities_with_spans(
    text: &str,
    graph: &ConceptGraph,
    origin: Origin,
) -> Vec<(Entity, Range<usize>)> {
    let tokens = tokenize(text);
    let window = graph.max_label_tokens().max(1);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = (i..tokens.len().min(i + window)).rev().find_map(|j| {
            let span = tokens[i].span.start..tokens[j].span.end;
            graph.lookup(&text[span.clone()]).map(|c| (j, span, c.id.clone()))
        });
        let (next, entity, span) = match longest {
            Some((j, span, id)) => (j + 1, Some(Entity::new(&text[span.clone()], Some(id), origin)), span),
            None => {
                let tok = &tokens[i];
                let entity = is_noun_like(&tok.text)
                    .then(|| Entity::new(&text[tok.span.clone()], None, origin));
                (i + 1, entity, tok.span.clone())
            }
        };
        if let Some(e) = entity {
            if seen.insert(e.normalized_surface()) {
                out.push((e, span));
            }
        }
        i = next;
    }
    out
}

pub fn extract_entities(text: &str, graph: &ConceptGraph, origin: Origin) -> Vec<Entity> {
    extract_entities_with_spans(text, graph, origin)
        .into_iter()
        .map(|(e, _)| e)
        .collect()
}

/// Uses the provider's spans when it answers; falls back to the dictionary
/// matcher on any provider error. Provider spans are resolved against the graph
/// by label and deduplicated the same way.
pub fn extract_with_provider(
    text: &str,
    graph: &ConceptGraph,
    origin: Origin,
    provider: Option<&dyn NerProvider>,
) -> Vec<Entity> {
    let Some(provider) = provider else {
        return extract_entities(text, graph, origin);
    };
    match provider.recognize(text) {
        Ok(mut spans) => {
            spans.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end)));
            let mut out = Vec::new();
            let mut seen = HashSet::new();
            let mut covered = 0;
            for s in spans {
                if s.start < covered {
                    continue;
                }
                let surface = text[s.start..s.end].trim();
                if surface.is_empty() {
                    continue;
                }
                covered = s.end;
                let concept = graph.lookup(surface).map(|c| c.id.clone());
                let e = Entity::new(surface, concept, origin);
                if seen.insert(e.normalized_surface()) {
                    out.push(e);
                }
            }
            out
        }
        Err(e) => {
            log::warn!("{e}; using dictionary matcher");
            extract_entities(text, graph, origin)
        }
    }
}

/// Query entities first, then sentinel entities whose normalized surface is new.
pub fn merge_entities(query_entities: &[Entity], sentinel_entities: &[Entity]) -> Vec<Entity> {
    let mut seen = HashSet::new();
    query_entities
        .iter()
        .chain(sentinel_entities)
        .filter(|e| seen.insert(e.normalized_surface()))
        .cloned()
        .collect()
}
