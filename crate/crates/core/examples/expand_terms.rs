//! Graph and masked-substitution expansion with offline providers.
//!
//! cargo run --example expand_terms

use srsearch::embed::HashedBagEmbedder;
use srsearch::expand::{build_expansion, ExpansionConfig};
use srsearch::extract::{extract_entities, Origin};
use srsearch::kg::ConceptGraph;
use srsearch::providers::TableMaskProvider;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("mesh-mini.jsonl", None, "catgut sutures for wound infection"),
        (
            "golden/graph.jsonl",
            Some("golden/mask_table.json"),
            "Gender affirming surgeries for female-to-male transgender individuals.",
        ),
    ];
    for (graph, table, question) in cases {
        let graph = ConceptGraph::load(format!("{FIXTURES}/{graph}"))?;
        let mask = table.map(|t| TableMaskProvider::load(format!("{FIXTURES}/{t}"))).transpose()?;
        let entities = extract_entities(question, &graph, Origin::Query);
        let exp = build_expansion(
            &entities,
            &graph,
            &HashedBagEmbedder,
            mask.as_ref().map(|m| m as _),
            question,
            &[],
            &ExpansionConfig {
                // The hashed-bag fallback scores unrelated labels low; accept any.
                semantic_threshold: -1.0,
                ..ExpansionConfig::default()
            },
        )?;
        println!("{question}");
        for e in &exp.entries {
            let kg: Vec<String> = e.kg_terms.iter().map(|t| format!("{}[{}]", t.label, t.tag.as_str())).collect();
            println!("  {:<28} kg={kg:?} mask={:?}", e.entity.surface, e.mask_terms);
        }
    }
    Ok(())
}
