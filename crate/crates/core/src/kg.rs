//! Controlled-vocabulary concept graph: loading, label lookup and hop-bounded traversal.
//!
//! The interchange format is one JSON object per line:
//!
//! ```text
//! {"id": "D013536", "label": "Sutures", "synonyms": ["Suture"], "tag": "MESH",
//!  "edges": [{"to": "D013525", "rel": "broader"}]}
//! ```
//!
//! Edges may be declared on either endpoint. Traversal ignores direction and
//! relation label.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::query::FieldTag;
use crate::text::normalize_label;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("edge {source_id} -> {target} points at a concept that does not exist")]
    DanglingEdge { source_id: String, target: String },
    #[error("duplicate concept id {0}")]
    DuplicateId(String),
    #[error("unknown concept {0}")]
    UnknownConcept(String),
    #[error("reading graph file: {0}")]
    Io(#[from] std::io::Error),
}

impl GraphError {
    /// Short machine-readable name used in CLI and HTTP error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            GraphError::MalformedLine { .. } => "MalformedLine",
            GraphError::DanglingEdge { .. } => "DanglingEdge",
            GraphError::DuplicateId(_) => "DuplicateId",
            GraphError::UnknownConcept(_) => "UnknownConcept",
            GraphError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub preferred_label: String,
    pub synonyms: Vec<String>,
    pub field_tag_hint: FieldTag,
}

impl Concept {
    /// Preferred label followed by synonyms, in declared order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.preferred_label.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub relation: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConceptLine {
    id: String,
    label: String,
    #[serde(default)]
    synonyms: Vec<String>,
    #[serde(default = "default_tag")]
    tag: FieldTag,
    #[serde(default)]
    edges: Vec<EdgeLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeLine {
    to: String,
    #[serde(default)]
    rel: String,
}

fn default_tag() -> FieldTag {
    FieldTag::Tiab
}

/// Immutable after construction; share behind an `Arc` for concurrent readers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptGraph {
    concepts: BTreeMap<String, Concept>,
    edges: BTreeSet<Edge>,
    label_index: HashMap<String, String>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
    max_label_tokens: usize,
}

impl ConceptGraph {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let content = fs::read_to_string(path)?;
        Self::from_jsonl(&content)
    }

    pub fn from_jsonl(content: &str) -> Result<Self, GraphError> {
        let mut lines = Vec::new();
        for (idx, raw) in content.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: ConceptLine =
                serde_json::from_str(raw).map_err(|e| GraphError::MalformedLine {
                    line_no: idx + 1,
                    reason: e.to_string(),
                })?;
            if line.id.trim().is_empty() || line.label.trim().is_empty() {
                return Err(GraphError::MalformedLine {
                    line_no: idx + 1,
                    reason: "id and label must be non-empty".into(),
                });
            }
            lines.push(line);
        }

        let mut concepts = BTreeMap::new();
        let mut declared_edges = Vec::new();
        for line in lines {
            if concepts.contains_key(&line.id) {
                return Err(GraphError::DuplicateId(line.id));
            }
            let label_key = normalize_label(&line.label);
            let mut seen = BTreeSet::from([label_key]);
            let synonyms = line
                .synonyms
                .into_iter()
                .filter(|s| !s.trim().is_empty() && seen.insert(normalize_label(s)))
                .collect();
            for e in line.edges {
                declared_edges.push(Edge {
                    source: line.id.clone(),
                    target: e.to,
                    relation: e.rel,
                });
            }
            concepts.insert(
                line.id.clone(),
                Concept {
                    id: line.id,
                    preferred_label: line.label.trim().to_string(),
                    synonyms,
                    field_tag_hint: line.tag,
                },
            );
        }
        Self::build(concepts, declared_edges)
    }

    /// Assembles a graph from concepts and edges, validating endpoints.
    pub fn from_parts(
        concepts: impl IntoIterator<Item = Concept>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for c in concepts {
            if map.contains_key(&c.id) {
                return Err(GraphError::DuplicateId(c.id));
            }
            map.insert(c.id.clone(), c);
        }
        Self::build(map, edges.into_iter().collect())
    }

    fn build(concepts: BTreeMap<String, Concept>, declared: Vec<Edge>) -> Result<Self, GraphError> {
        let mut edges = BTreeSet::new();
        let mut pair_keys = BTreeSet::new();
        let mut adjacency: BTreeMap<String, BTreeSet<String>> =
            concepts.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        for edge in declared {
            for endpoint in [&edge.source, &edge.target] {
                if !concepts.contains_key(endpoint) {
                    return Err(GraphError::DanglingEdge {
                        source_id: edge.source.clone(),
                        target: edge.target.clone(),
                    });
                }
            }
            let (lo, hi) = if edge.source <= edge.target {
                (edge.source.clone(), edge.target.clone())
            } else {
                (edge.target.clone(), edge.source.clone())
            };
            // The same edge declared on both endpoints collapses to the first declaration.
            if !pair_keys.insert((lo, hi, edge.relation.clone())) {
                continue;
            }
            if edge.source != edge.target {
                adjacency.get_mut(&edge.source).unwrap().insert(edge.target.clone());
                adjacency.get_mut(&edge.target).unwrap().insert(edge.source.clone());
            }
            edges.insert(edge);
        }

        // Preferred labels win over synonyms; otherwise the first concept by id wins.
        let mut label_index = HashMap::new();
        for c in concepts.values() {
            label_index.entry(normalize_label(&c.preferred_label)).or_insert_with(|| c.id.clone());
        }
        for c in concepts.values() {
            for s in &c.synonyms {
                label_index.entry(normalize_label(s)).or_insert_with(|| c.id.clone());
            }
        }
        let max_label_tokens = concepts
            .values()
            .flat_map(|c| c.labels())
            .map(|l| crate::text::tokenize(l).len())
            .max()
            .unwrap_or(0);

        Ok(ConceptGraph {
            concepts,
            edges,
            label_index,
            adjacency,
            max_label_tokens,
        })
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Longest label measured in word tokens; bounds the dictionary matcher's window.
    pub fn max_label_tokens(&self) -> usize {
        self.max_label_tokens
    }

    /// Finds the concept whose preferred label or synonym normalizes to `label`.
    pub fn lookup(&self, label: &str) -> Option<&Concept> {
        self.label_index
            .get(&normalize_label(label))
            .and_then(|id| self.concepts.get(id))
    }

    /// Concepts reachable within `max_hops` undirected edges, excluding the start.
    /// Returned in id order.
    pub fn neighbors(&self, id: &str, max_hops: usize) -> Result<Vec<&Concept>, GraphError> {
        if !self.concepts.contains_key(id) {
            return Err(GraphError::UnknownConcept(id.to_string()));
        }
        let mut depth: HashMap<&str, usize> = HashMap::from([(id, 0)]);
        let mut queue = VecDeque::from([id]);
        while let Some(current) = queue.pop_front() {
            let d = depth[current];
            if d == max_hops {
                continue;
            }
            for next in &self.adjacency[current] {
                if !depth.contains_key(next.as_str()) {
                    depth.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }
        let found: BTreeSet<&str> = depth.into_keys().filter(|k| *k != id).collect();
        Ok(found.into_iter().map(|k| &self.concepts[k]).collect())
    }

    /// Canonical JSONL serialization: concepts in id order, each edge on its source line.
    pub fn to_jsonl(&self) -> String {
        let mut by_source: BTreeMap<&str, Vec<&Edge>> = BTreeMap::new();
        for e in &self.edges {
            by_source.entry(&e.source).or_default().push(e);
        }
        let mut out = String::new();
        for c in self.concepts.values() {
            let line = ConceptLine {
                id: c.id.clone(),
                label: c.preferred_label.clone(),
                synonyms: c.synonyms.clone(),
                tag: c.field_tag_hint,
                edges: by_source
                    .get(c.id.as_str())
                    .map(|es| {
                        es.iter()
                            .map(|e| EdgeLine {
                                to: e.target.clone(),
                                rel: e.relation.clone(),
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
            };
            out.push_str(&serde_json::to_string(&line).expect("concept line serializes"));
            out.push('\n');
        }
        out
    }

    /// Content hash of the canonical serialization.
    pub fn version(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}
