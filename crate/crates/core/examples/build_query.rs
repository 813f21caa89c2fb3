//! Builds the strictest boolean query for a question and parses it back.
//!
//! cargo run --example build_query

use srsearch::embed::HashedBagEmbedder;
use srsearch::expand::{build_expansion, ExpansionConfig};
use srsearch::extract::{extract_entities, Origin};
use srsearch::kg::ConceptGraph;
use srsearch::providers::TableMaskProvider;
use srsearch::query::{build_specific_query, entity_relevance, parse_query, render, wildcard_stem};

const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/golden");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let question = "Gender affirming surgeries for female-to-male transgender individuals.";
    let graph = ConceptGraph::load(format!("{DIR}/graph.jsonl"))?;
    let mask = TableMaskProvider::load(format!("{DIR}/mask_table.json"))?;

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
    let query = build_specific_query(&exp)?;
    let key = render(&query);
    println!("{key}");

    for word in ["Gender", "surgeries", "female", "transgender", "individuals"] {
        println!("{word:>12} -> {}*", wildcard_stem(word).unwrap_or_default());
    }

    let printed = std::fs::read_to_string(format!("{DIR}/search_key_printed.txt"))?;
    let parsed = parse_query(&printed)?;
    let sizes: Vec<usize> = parsed.groups().iter().map(|g| g.terms().len()).collect();
    println!("printed key groups: {sizes:?}, identical: {}", parsed == query);
    Ok(())
}
