//! Dictionary entity extraction from a question and a sentinel article.
//!
//! cargo run --example extract_entities

use srsearch::extract::{extract_entities, extract_entities_with_spans, merge_entities, Origin, SentinelArticle};
use srsearch::kg::ConceptGraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = ConceptGraph::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mesh-mini.jsonl"))?;
    let question = "Do catgut sutures reduce wound infection after surgery?";
    let sentinel = SentinelArticle {
        title: "Antibacterial sutures and surgical site infection".into(),
        abstract_text: "Sutures coated with triclosan were compared with plain sutures.".into(),
        source_id: None,
    };

    let query_entities = extract_entities_with_spans(question, &graph, Origin::Query);
    for (e, span) in &query_entities {
        println!("{:>8?} {:<24} concept={:?}", span, e.surface, e.concept_id);
    }

    // Only sentinel entities that resolve to a concept are kept.
    let from_sentinel: Vec<_> = extract_entities(&sentinel.text(), &graph, Origin::Sentinel)
        .into_iter()
        .filter(|e| e.concept_id.is_some())
        .collect();
    let query_only: Vec<_> = query_entities.into_iter().map(|(e, _)| e).collect();
    let merged = merge_entities(&query_only, &from_sentinel);
    println!("merged: {:?}", merged.iter().map(|e| &e.surface).collect::<Vec<_>>());
    Ok(())
}
