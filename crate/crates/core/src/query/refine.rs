//! Iterative widening: drop the least relevant entity until enough articles match.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expand::{ExpansionEntry, ExpansionSet};
use crate::extract::Entity;
use crate::retrieval::{Article, BackendError, SearchBackend};

use super::build::query_for;
use super::{render, BooleanQuery, QueryError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceIteration {
    pub query: BooleanQuery,
    pub rendered: String,
    pub hit_count: usize,
    /// Entity dropped after this iteration; absent on the final one.
    pub removed_entity: Option<Entity>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub iterations: Vec<TraceIteration>,
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub query: BooleanQuery,
    pub rendered: String,
    pub articles: Vec<Article>,
    /// Ids the backend listed but could not fetch.
    pub missing: Vec<String>,
    pub trace: RefinementTrace,
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("n_min must be at least 1")]
    InvalidMinimum,
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("{source}")]
    Backend {
        source: BackendError,
        trace: RefinementTrace,
    },
}

/// Index of the surviving entry to drop: lowest relevance, later entry on ties.
fn least_relevant(survivors: &[&ExpansionEntry]) -> usize {
    let mut pick = 0;
    for (i, e) in survivors.iter().enumerate().skip(1) {
        if e.entity.relevance <= survivors[pick].entity.relevance {
            pick = i;
        }
    }
    pick
}

/// Starts from the all-entity query and removes the least relevant entity
/// while fewer than `n_min` articles match and more than one entity remains.
///
/// Entity relevance must already be scored. At most one search per entity is
/// issued; the final query's top `retmax` articles are then fetched.
pub fn refine_until(
    exp: &ExpansionSet,
    backend: &dyn SearchBackend,
    n_min: usize,
    retmax: usize,
) -> Result<Refinement, RefineError> {
    if n_min == 0 {
        return Err(RefineError::InvalidMinimum);
    }
    let mut survivors: Vec<&ExpansionEntry> = exp.entries.iter().collect();
    let mut trace = RefinementTrace::default();
    loop {
        let query = query_for(survivors.iter().copied())?;
        let rendered = render(&query);
        let hits = match backend.search(&query, &rendered, retmax) {
            Ok(h) => h,
            Err(source) => return Err(RefineError::Backend { source, trace }),
        };
        if hits.total >= n_min || survivors.len() <= 1 {
            trace.iterations.push(TraceIteration {
                query: query.clone(),
                rendered: rendered.clone(),
                hit_count: hits.total,
                removed_entity: None,
            });
            let fetched = if hits.ids.is_empty() {
                Default::default()
            } else {
                match backend.fetch(&hits.ids) {
                    Ok(f) => f,
                    Err(source) => return Err(RefineError::Backend { source, trace }),
                }
            };
            return Ok(Refinement {
                query,
                rendered,
                articles: fetched.articles,
                missing: fetched.missing,
                trace,
            });
        }
        let drop = least_relevant(&survivors);
        let removed = survivors.remove(drop);
        trace.iterations.push(TraceIteration {
            query,
            rendered,
            hit_count: hits.total,
            removed_entity: Some(removed.entity.clone()),
        });
    }
}
