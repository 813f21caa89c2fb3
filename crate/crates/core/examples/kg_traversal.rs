//! Label lookup and bounded neighborhood expansion over a concept graph.
//!
//! cargo run --example kg_traversal [graph.jsonl]

use srsearch::kg::ConceptGraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mesh-mini.jsonl").into());
    let graph = ConceptGraph::load(&path)?;
    println!("{} concepts, {} edges, version {}", graph.len(), graph.edge_count(), graph.version());

    let sutures = graph.lookup("catgut sutures").expect("synonym resolves");
    println!("'catgut sutures' -> {} ({})", sutures.id, sutures.preferred_label);

    let start = graph.lookup("Sutures").expect("label resolves");
    for hops in 1..=2 {
        let labels: Vec<&str> = graph
            .neighbors(&start.id, hops)?
            .iter()
            .map(|c| c.preferred_label.as_str())
            .collect();
        println!("within {hops} hop(s) of {}: {labels:?}", start.preferred_label);
    }
    Ok(())
}
