//! Widens a query over a local corpus until it retrieves enough articles.
//!
//! cargo run --example refine_local [n_min]

use std::sync::Arc;

use srsearch::embed::HashedBagEmbedder;
use srsearch::expand::{build_expansion, ExpansionConfig};
use srsearch::extract::{extract_entities, Origin};
use srsearch::kg::ConceptGraph;
use srsearch::providers::TableMaskProvider;
use srsearch::query::{entity_relevance, refine_until};
use srsearch::retrieval::{Corpus, LocalBackend};

const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/golden");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_min: usize = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let question = "Gender affirming surgeries for female-to-male transgender individuals.";
    let graph = ConceptGraph::load(format!("{DIR}/graph.jsonl"))?;
    let mask = TableMaskProvider::load(format!("{DIR}/mask_table.json"))?;
    let backend = LocalBackend::new(Arc::new(Corpus::load(format!("{DIR}/corpus.jsonl"))?));

    let entities = extract_entities(question, &graph, Origin::Query);
    let mut exp = build_expansion(
        &entities,
        &graph,
        &HashedBagEmbedder,
        Some(&mask),
        question,
        &[],
        &ExpansionConfig::default(),
    )?;
    entity_relevance(&mut exp, &HashedBagEmbedder)?;
    for e in &exp.entries {
        println!("relevance {:.3}  {}", e.entity.relevance, e.entity.surface);
    }

    let refined = refine_until(&exp, &backend, n_min, 100)?;
    for it in &refined.trace.iterations {
        let removed = it.removed_entity.as_ref().map_or("-", |e| e.surface.as_str());
        println!("{:>4} hits, then drop {removed:<28} {}", it.hit_count, it.rendered);
    }
    println!("fetched {} articles", refined.articles.len());
    Ok(())
}
