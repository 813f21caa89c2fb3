use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use srsearch::config::Config;
use srsearch::extract::SentinelArticle;
use srsearch::feedback::{offline_report, read_jsonl, FeedbackRecord, QuerySession, Scope};
use srsearch::kg::{ConceptGraph, GraphError};
use srsearch::service::{http, run_search, BackendChoice, Deps, SearchError, SearchRequest};

#[derive(Parser)]
#[command(name = "srsearch", version, about = "Boolean literature search with graph-based term expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a concept graph and write it in canonical form.
    IngestKg {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build, refine and rerank a query.
    Search(SearchArgs),
    /// Relevance report over recorded sessions and judgments.
    Eval {
        /// Session JSONL, as written to `sessions.jsonl`.
        #[arg(long)]
        requests: PathBuf,
        /// Judgment JSONL, as written to `feedback.jsonl`.
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        query_id: Option<String>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    query: String,
    /// JSON file with one sentinel object or an array of them.
    #[arg(long)]
    sentinel_file: Option<PathBuf>,
    #[arg(long, conflicts_with = "remote")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    remote: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Concept graph; overrides the configured one.
    #[arg(long)]
    graph: Option<PathBuf>,
}

/// Failure printed to stderr as one JSON object.
struct Failure(Value);

impl Failure {
    fn new(kind: &str, message: impl ToString) -> Self {
        Failure(json!({ "error": kind, "message": message.to_string() }))
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let mut f = Failure::new(e.kind(), &e);
        match &e {
            GraphError::DanglingEdge { source_id, target } => {
                f.0["source"] = json!(source_id);
                f.0["target"] = json!(target);
            }
            GraphError::MalformedLine { line_no, .. } => f.0["line"] = json!(line_no),
            GraphError::DuplicateId(id) | GraphError::UnknownConcept(id) => f.0["id"] = json!(id),
            GraphError::Io(_) => {}
        }
        f
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        let mut f = Failure::new(if e.is_backend_failure() { "Backend" } else { "Search" }, &e);
        if let SearchError::Validation(v) = &e {
            f = Failure::new("Validation", &v.message);
            f.0["field"] = json!(v.field);
        }
        if let Some(stage) = e.stage() {
            f.0["stage"] = json!(stage);
        }
        f
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(|e| Failure::new("Config", e)),
        None => {
            let mut c = Config::default();
            c.apply_env(|k| std::env::var(k).ok()).map_err(|e| Failure::new("Config", e))?;
            c.validate().map_err(|e| Failure::new("Config", e))?;
            Ok(c)
        }
    }
}

fn ingest(input: &Path, out: &Path) -> Result<(), Failure> {
    let graph = ConceptGraph::load(input)?;
    std::fs::write(out, graph.to_jsonl()).map_err(|e| Failure::new("Io", e))?;
    println!(
        "{}",
        json!({
            "graph_version": graph.version(),
            "concepts": graph.len(),
            "edges": graph.edge_count(),
            "out": out,
        })
    );
    Ok(())
}

fn read_sentinels(path: &Path) -> Result<Vec<SentinelArticle>, Failure> {
    let raw = std::fs::read_to_string(path).map_err(|e| Failure::new("Io", e))?;
    let value: Value = serde_json::from_str(&raw).map_err(|e| Failure::new("Sentinels", e))?;
    let parsed = match value {
        Value::Array(_) => serde_json::from_value(value),
        other => serde_json::from_value(other).map(|s| vec![s]),
    };
    parsed.map_err(|e| Failure::new("Sentinels", e))
}

fn search(args: SearchArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(g) = args.graph {
        config.graph = g;
    }
    let req = SearchRequest {
        query: args.query,
        sentinels: match &args.sentinel_file {
            Some(p) => read_sentinels(p)?,
            None => Vec::new(),
        },
        k: args.k,
        n_min: args.n_min,
        backend: match args.corpus {
            Some(p) => BackendChoice::Local(p),
            None => BackendChoice::Remote,
        },
    };
    req.validate().map_err(SearchError::from)?;
    let deps = Deps::from_config(config).map_err(|e| Failure::new("Init", e))?;
    let resp = run_search(&req, &deps)?;
    let mut out = std::io::stdout().lock();
    let written = if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&resp).expect("response serializes"))
    } else {
        writeln!(out, "{}", resp.rendered_query).and_then(|()| {
            resp.results.iter().try_for_each(|r| {
                writeln!(out, "{:>6}  {}  {}", r.display_score(), r.article.external_id, r.article.title)
            })
        })
    };
    match written {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::new("Io", e)),
        _ => Ok(()),
    }
}

fn eval(requests: &Path, judgments: &Path, query_id: Option<String>) -> Result<(), Failure> {
    let sessions: Vec<QuerySession> = read_jsonl(requests).map_err(|e| Failure::new("Requests", e))?;
    let records: Vec<FeedbackRecord> = read_jsonl(judgments).map_err(|e| Failure::new("Judgments", e))?;
    let scope = query_id.map_or(Scope::All, Scope::Query);
    let report = offline_report(sessions, records, &scope).map_err(|e| Failure::new("Eval", e))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn serve(config: &Path, bind: Option<String>) -> Result<(), Failure> {
    let mut config = load_config(Some(config))?;
    if let Some(b) = bind {
        config.server.bind = b;
    }
    let bind = config.server.bind.clone();
    let deps = Arc::new(Deps::from_config(config).map_err(|e| Failure::new("Init", e))?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new("Io", e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        log::info!("listening on {}", listener.local_addr()?);
        http::serve(listener, deps).await
    })
    .map_err(|e| Failure::new("Io", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::IngestKg { input, out } => ingest(&input, &out),
        Command::Search(args) => search(args),
        Command::Eval {
            requests,
            judgments,
            query_id,
        } => eval(&requests, &judgments, query_id),
        Command::Serve { config, bind } => serve(&config, bind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(v)) => {
            eprintln!("{v}");
            ExitCode::FAILURE
        }
    }
}
