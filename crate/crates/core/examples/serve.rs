//! Serves the JSON API over the bundled fixture graph and corpus.
//!
//! cargo run --example serve [bind]
//! curl -s localhost:8080/api/search -H 'content-type: application/json' \
//!   -d '{"query":"Gender affirming surgeries for female-to-male transgender individuals.","backend":{"LOCAL":"fixtures/golden/corpus.jsonl"}}'

use std::sync::Arc;

use srsearch::config::Config;
use srsearch::service::{http, Deps};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bind = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    let data = tempfile::tempdir()?;
    let mut config = Config::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/golden/srsearch.toml"))?;
    config.data_dir = data.path().to_path_buf();
    let deps = Arc::new(Deps::from_config(config)?);

    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        println!("listening on http://{}", listener.local_addr()?);
        http::serve(listener, deps).await
    })?;
    Ok(())
}
