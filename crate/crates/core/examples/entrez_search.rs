//! Runs a boolean query against an E-utilities endpoint and fetches the hits.
//!
//! SRSEARCH_ENTREZ_BASE_URL overrides the public endpoint.
//! cargo run --example entrez_search -- '("catgut"[tiab]) AND (Sutures[Mesh])'

use srsearch::retrieval::{EntrezClient, EntrezConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let query = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "(\"catgut sutures\"[tiab]) AND (infection[tiab] OR infect*[tiab])".into());
    let mut config = EntrezConfig::default();
    if let Ok(url) = std::env::var("SRSEARCH_ENTREZ_BASE_URL") {
        config.base_url = url;
    }
    config.api_key = std::env::var("SRSEARCH_ENTREZ_API_KEY").ok();
    let client = EntrezClient::new(config);

    let hits = client.esearch(&query, 10)?;
    println!("{} total, first {}: {:?}", hits.total, hits.ids.len(), hits.ids);
    let fetched = client.efetch(&hits.ids)?;
    for a in &fetched.articles {
        println!("{}  {}", a.external_id, a.title);
    }
    if !fetched.missing.is_empty() {
        println!("missing: {:?}", fetched.missing);
    }
    Ok(())
}
