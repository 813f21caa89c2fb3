//! Knowledge-graph assisted boolean search for systematic reviews.
//!
//! A natural-language question and a few known-relevant articles are turned
//! into a fielded boolean query, widened until it retrieves enough articles,
//! and the hits are reranked by embedding similarity. Librarian judgments are
//! stored per session and summarized as a relevance percentage.

pub mod config;
pub mod embed;
pub mod expand;
pub mod extract;
pub mod feedback;
pub mod kg;
pub mod providers;
pub mod query;
pub mod retrieval;
pub mod service;
pub mod text;
