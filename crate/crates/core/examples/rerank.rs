//! Reranks a corpus by similarity to a question and sentinel articles.
//!
//! cargo run --example rerank [k]

use srsearch::embed::{rerank, HashedBagEmbedder};
use srsearch::extract::SentinelArticle;
use srsearch::query::parse_query;
use srsearch::retrieval::Corpus;

const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/golden");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k: usize = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let question = "Gender affirming surgeries for female-to-male transgender individuals.";
    let corpus = Corpus::load(format!("{DIR}/corpus.jsonl"))?;
    let sentinels: Vec<SentinelArticle> = serde_json::from_str(&std::fs::read_to_string(format!("{DIR}/sentinels.json"))?)?;
    let key = parse_query(&std::fs::read_to_string(format!("{DIR}/search_key.txt"))?)?;
    let terms: Vec<_> = key.terms().cloned().collect();

    for r in rerank(corpus.articles(), question, &sentinels, k, &HashedBagEmbedder, &terms)? {
        let marked: Vec<&str> = r.highlights.iter().map(|&(s, e)| &r.article.abstract_text[s..e]).collect();
        println!("{:>6}  {}  {}", r.display_score(), r.article.external_id, r.article.title);
        println!("        highlights: {marked:?}");
    }
    Ok(())
}
