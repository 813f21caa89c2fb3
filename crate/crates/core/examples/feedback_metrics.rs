//! Records librarian judgments and reports the relevance percentage.
//!
//! cargo run --example feedback_metrics [data_dir]

use chrono::Utc;
use srsearch::feedback::{Categories, Category, FeedbackRecord, FeedbackStore, QuerySession, Scope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map_or_else(|| tmp.path().to_path_buf(), Into::into);
    let store = FeedbackStore::open(&dir)?;

    let ids: Vec<String> = (1..=5).map(|i| format!("AD000{i}")).collect();
    let session = QuerySession {
        query_id: "example".into(),
        query_text: "Gender affirming surgeries for female-to-male transgender individuals.".into(),
        sentinels: vec![],
        rendered_query: String::new(),
        ranked_article_ids: ids.clone(),
        results: vec![],
        backend: "local".into(),
        k: ids.len(),
        n_min: 20,
        graph_version: String::new(),
        created: Utc::now(),
    };
    store.save_session(&session)?;

    for (i, id) in ids.iter().enumerate() {
        let relevant = i != 2;
        store.record_feedback(&FeedbackRecord {
            query_id: "example".into(),
            article_id: id.clone(),
            relevant,
            categories: Categories::none_checked().with(Category::ALL[0], relevant),
            missing_concepts: String::new(),
            timestamp: Utc::now(),
        })?;
    }
    let report = store.relevance_percentage(&Scope::All);
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("log at {}", store.feedback_path().display());
    Ok(())
}
