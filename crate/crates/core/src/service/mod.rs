//! The end-to-end search pipeline and the state it shares across requests.

pub mod http;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::embed::{rerank, EmbedError, Embedder, HashedBagEmbedder, RankedArticle};
use crate::expand::{build_expansion, ExpandError};
use crate::extract::{extract_with_provider, merge_entities, Entity, Origin, SentinelArticle};
use crate::feedback::{FeedbackError, FeedbackStore, QuerySession};
use crate::kg::{ConceptGraph, GraphError};
use crate::providers::{
    FallbackEmbedder, HttpEmbedder, HttpMaskProvider, HttpNerProvider, MaskProvider, NerProvider,
    TableMaskProvider, DEFAULT_TIMEOUT,
};
use crate::query::{build_specific_query, entity_relevance, refine_until, QueryError, RefineError};
use crate::retrieval::{BackendError, Corpus, CorpusError, EntrezClient, LocalBackend, SearchBackend};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BackendChoice {
    #[default]
    Remote,
    /// JSONL corpus searched in-process.
    Local(PathBuf),
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendChoice::Remote => f.write_str("remote"),
            BackendChoice::Local(p) => write!(f, "local:{}", p.display()),
        }
    }
}

/// `k` and `n_min` fall back to the configured defaults when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default)]
    pub sentinels: Vec<SentinelArticle>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub n_min: Option<usize>,
    #[serde(default)]
    pub backend: BackendChoice,
}

impl SearchRequest {
    pub fn new(query: impl Into<String>) -> Self {
        SearchRequest {
            query: query.into(),
            sentinels: Vec::new(),
            k: None,
            n_min: None,
            backend: BackendChoice::Remote,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.query.trim().is_empty() {
            return Err(ValidationError::new("query", "must not be empty"));
        }
        if self.k == Some(0) {
            return Err(ValidationError::new("k", "must be at least 1"));
        }
        if self.n_min == Some(0) {
            return Err(ValidationError::new("n_min", "must be at least 1"));
        }
        for (i, s) in self.sentinels.iter().enumerate() {
            if s.title.trim().is_empty() {
                return Err(ValidationError::new(format!("sentinels[{i}].title"), "must not be empty"));
            }
        }
        if let BackendChoice::Local(p) = &self.backend {
            if p.as_os_str().is_empty() {
                return Err(ValidationError::new("backend", "local corpus path must not be empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Merge,
    Expand,
    Build,
    Retrieve,
    Rerank,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("stage is a string"))
    }
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Storage(#[from] FeedbackError),
    #[error("no remote backend is configured")]
    NoRemote,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid request: {0}")]
    Validation(#[from] ValidationError),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageFailure,
    },
}

impl SearchError {
    fn at(stage: Stage) -> impl FnOnce(StageFailure) -> SearchError {
        move |source| SearchError::Stage { stage, source }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            SearchError::Validation(_) => None,
            SearchError::Stage { stage, .. } => Some(*stage),
        }
    }

    /// True when the search backend, not the request or the service, failed.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            SearchError::Stage {
                source: StageFailure::Refine(RefineError::Backend { .. }),
                ..
            }
        )
    }

    /// True when the request itself cannot be served as given.
    pub fn is_client_error(&self) -> bool {
        match self {
            SearchError::Validation(_) => true,
            SearchError::Stage { source, .. } => matches!(
                source,
                StageFailure::Corpus(_) | StageFailure::NoRemote | StageFailure::Expand(ExpandError::NoEntities)
            ),
        }
    }

    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            SearchError::Stage {
                source: StageFailure::Refine(RefineError::Backend { source, .. }),
                ..
            } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rendered_query: String,
    pub hit_count: usize,
    /// Surface of the entity dropped after this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed_entity: Option<String>,
}

/// Wall-clock milliseconds spent in each stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub extract: f64,
    pub merge: f64,
    pub expand: f64,
    pub build: f64,
    pub retrieve: f64,
    pub rerank: f64,
    pub persist: f64,
    pub total: f64,
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query_id: String,
    pub rendered_query: String,
    /// Merged entities with their relevance scores, in query order.
    pub entities: Vec<Entity>,
    pub trace: Vec<TraceStep>,
    pub results: Vec<RankedArticle>,
    /// Ids the backend listed but could not return.
    pub missing: Vec<String>,
    pub graph_version: String,
    pub timing: StageTimings,
}

/// Provider modes reported by the health endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderStatus {
    pub ner: String,
    pub mlm: String,
    pub embedding: String,
}

/// Everything a search needs, shared by concurrent requests.
pub struct Deps {
    pub config: Config,
    pub graph: Arc<ConceptGraph>,
    pub graph_version: String,
    pub ner: Option<Box<dyn NerProvider>>,
    pub mask: Option<Box<dyn MaskProvider>>,
    pub embedder: Box<dyn Embedder>,
    pub remote: Option<Arc<dyn SearchBackend>>,
    pub store: FeedbackStore,
    corpora: Mutex<HashMap<PathBuf, Arc<Corpus>>>,
}

#[derive(Debug, Error)]
pub enum InitError {
    #[error("cannot load concept graph {path}: {source}")]
    Graph { path: PathBuf, source: GraphError },
    #[error("cannot load mask table {path}: {source}")]
    MaskTable { path: PathBuf, source: std::io::Error },
    #[error("cannot open data directory: {0}")]
    Store(#[from] FeedbackError),
}

impl Deps {
    /// Builds providers from the configuration. Each provider without a URL
    /// uses its offline fallback. Must run outside an async runtime because
    /// the HTTP clients are blocking.
    pub fn from_config(config: Config) -> Result<Self, InitError> {
        let graph = ConceptGraph::load(&config.graph).map_err(|source| InitError::Graph {
            path: config.graph.clone(),
            source,
        })?;
        let timeout = config
            .providers
            .timeout_ms
            .map(Duration::from_millis)
            .unwrap_or(DEFAULT_TIMEOUT);
        let ner = config
            .providers
            .ner_url
            .as_deref()
            .map(|u| Box::new(HttpNerProvider::new(u, timeout)) as Box<dyn NerProvider>);
        let mask: Option<Box<dyn MaskProvider>> = match (&config.providers.mlm_url, &config.mask_table) {
            (Some(u), _) => Some(Box::new(HttpMaskProvider::new(u, timeout))),
            (None, Some(path)) => Some(Box::new(TableMaskProvider::load(path).map_err(|source| {
                InitError::MaskTable {
                    path: path.clone(),
                    source,
                }
            })?)),
            (None, None) => None,
        };
        let embedder: Box<dyn Embedder> = match config.providers.embedding_url.as_deref() {
            Some(u) => Box::new(FallbackEmbedder::new(HttpEmbedder::new(u, timeout), HashedBagEmbedder)),
            None => Box::new(HashedBagEmbedder),
        };
        let remote: Arc<dyn SearchBackend> = Arc::new(EntrezClient::new(config.entrez.clone()));
        let store = FeedbackStore::open(&config.data_dir)?;
        let mut deps = Deps::new(config, graph, store);
        deps.ner = ner;
        deps.mask = mask;
        deps.embedder = embedder;
        deps.remote = Some(remote);
        Ok(deps)
    }

    /// Offline dependencies: dictionary extraction, graph-synonym masking,
    /// hashed embeddings and no remote backend.
    pub fn new(config: Config, graph: ConceptGraph, store: FeedbackStore) -> Self {
        Deps {
            config,
            graph_version: graph.version(),
            graph: Arc::new(graph),
            ner: None,
            mask: None,
            embedder: Box::new(HashedBagEmbedder),
            remote: None,
            store,
            corpora: Mutex::new(HashMap::new()),
        }
    }

    pub fn provider_status(&self) -> ProviderStatus {
        ProviderStatus {
            ner: if self.ner.is_some() { "external" } else { "fallback" }.into(),
            mlm: self.mask.as_ref().map_or("fallback", |m| m.mode()).into(),
            embedding: self.embedder.mode().into(),
        }
    }

    /// Loads a local corpus once per path.
    pub fn corpus(&self, path: &Path) -> Result<Arc<Corpus>, CorpusError> {
        if let Some(c) = self.corpora.lock().expect("corpus cache poisoned").get(path) {
            return Ok(c.clone());
        }
        let corpus = Arc::new(Corpus::load(path)?);
        Ok(self
            .corpora
            .lock()
            .expect("corpus cache poisoned")
            .entry(path.to_path_buf())
            .or_insert(corpus)
            .clone())
    }

    fn backend(&self, choice: &BackendChoice) -> Result<Arc<dyn SearchBackend>, StageFailure> {
        match choice {
            BackendChoice::Local(path) => Ok(Arc::new(LocalBackend::new(self.corpus(path)?))),
            BackendChoice::Remote => self.remote.clone().ok_or(StageFailure::NoRemote),
        }
    }
}

/// Runs extraction, expansion, query construction, refinement and reranking,
/// then stores the session.
///
/// Sentinel text contributes only entities that resolve to a graph concept;
/// every query entity is kept.
pub fn run_search(req: &SearchRequest, deps: &Deps) -> Result<SearchResponse, SearchError> {
    req.validate()?;
    let k = req.k.unwrap_or(deps.config.search.k);
    let n_min = req.n_min.unwrap_or(deps.config.search.n_min);
    let started = Instant::now();
    let mut timing = StageTimings::default();
    let graph = deps.graph.as_ref();

    let t = Instant::now();
    let ner = deps.ner.as_deref();
    let query_entities = extract_with_provider(&req.query, graph, Origin::Query, ner);
    let sentinel_entities: Vec<Entity> = req
        .sentinels
        .iter()
        .flat_map(|s| extract_with_provider(&s.text(), graph, Origin::Sentinel, ner))
        .filter(|e| e.concept_id.is_some())
        .collect();
    timing.extract = ms(t.elapsed());

    let t = Instant::now();
    let entities = merge_entities(&query_entities, &sentinel_entities);
    timing.merge = ms(t.elapsed());

    let t = Instant::now();
    let mut expansion = build_expansion(
        &entities,
        graph,
        deps.embedder.as_ref(),
        deps.mask.as_deref(),
        &req.query,
        &req.sentinels,
        &deps.config.search.expansion(),
    )
    .map_err(|e| SearchError::at(Stage::Expand)(e.into()))?;
    timing.expand = ms(t.elapsed());

    let t = Instant::now();
    entity_relevance(&mut expansion, deps.embedder.as_ref())
        .map_err(|e| SearchError::at(Stage::Build)(e.into()))?;
    build_specific_query(&expansion).map_err(|e| SearchError::at(Stage::Build)(e.into()))?;
    timing.build = ms(t.elapsed());

    let t = Instant::now();
    let backend = deps.backend(&req.backend).map_err(SearchError::at(Stage::Retrieve))?;
    let refined = refine_until(&expansion, backend.as_ref(), n_min, deps.config.search.retmax)
        .map_err(|e| SearchError::at(Stage::Retrieve)(e.into()))?;
    timing.retrieve = ms(t.elapsed());

    let t = Instant::now();
    let highlight_terms: Vec<_> = refined.query.terms().cloned().collect();
    let results = rerank(
        &refined.articles,
        &req.query,
        &req.sentinels,
        k,
        deps.embedder.as_ref(),
        &highlight_terms,
    )
    .map_err(|e| SearchError::at(Stage::Rerank)(e.into()))?;
    timing.rerank = ms(t.elapsed());

    let t = Instant::now();
    let query_id = uuid::Uuid::new_v4().to_string();
    let session = QuerySession {
        query_id: query_id.clone(),
        query_text: req.query.clone(),
        sentinels: req.sentinels.clone(),
        rendered_query: refined.rendered.clone(),
        ranked_article_ids: results.iter().map(|r| r.article.external_id.clone()).collect(),
        results: results.clone(),
        backend: req.backend.to_string(),
        k,
        n_min,
        graph_version: deps.graph_version.clone(),
        created: Utc::now(),
    };
    deps.store
        .save_session(&session)
        .map_err(|e| SearchError::at(Stage::Persist)(e.into()))?;
    timing.persist = ms(t.elapsed());
    timing.total = ms(started.elapsed());

    let trace = refined
        .trace
        .iterations
        .iter()
        .map(|it| TraceStep {
            rendered_query: it.rendered.clone(),
            hit_count: it.hit_count,
            removed_entity: it.removed_entity.as_ref().map(|e| e.surface.clone()),
        })
        .collect();
    Ok(SearchResponse {
        query_id,
        rendered_query: refined.rendered,
        entities: expansion.entries.into_iter().map(|e| e.entity).collect(),
        trace,
        results,
        missing: refined.missing,
        graph_version: deps.graph_version.clone(),
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::Article;

    fn deps(dir: &Path) -> Deps {
        let graph = ConceptGraph::from_jsonl(
            r#"{"id":"S","label":"Sutures","synonyms":["suture"],"tag":"MESH","edges":[{"to":"C","rel":"narrower"}]}
{"id":"C","label":"Catgut","tag":"TIAB"}
"#,
        )
        .unwrap();
        let store = FeedbackStore::open(dir.join("data")).unwrap();
        Deps::new(Config::default(), graph, store)
    }

    fn write_corpus(dir: &Path, n: usize) -> PathBuf {
        let path = dir.join("corpus.jsonl");
        let lines: Vec<String> = (0..n)
            .map(|i| {
                serde_json::to_string(&Article {
                    external_id: format!("{i:03}"),
                    title: format!("Sutures in wound closure {i}"),
                    abstract_text: "Catgut sutures were compared in infected wounds.".into(),
                    mesh_terms: vec!["Sutures".into()],
                    journal: None,
                })
                .unwrap()
            })
            .collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn validation_names_the_field() {
        let mut r = SearchRequest::new("  ");
        assert_eq!(r.validate().unwrap_err().field, "query");
        r.query = "q".into();
        r.k = Some(0);
        assert_eq!(r.validate().unwrap_err().field, "k");
        r.k = None;
        r.n_min = Some(0);
        assert_eq!(r.validate().unwrap_err().field, "n_min");
        r.n_min = None;
        r.sentinels.push(SentinelArticle {
            title: "".into(),
            abstract_text: "x".into(),
            source_id: None,
        });
        assert_eq!(r.validate().unwrap_err().field, "sentinels[0].title");
    }

    #[test]
    fn backend_choice_wire_format() {
        let r: SearchRequest =
            serde_json::from_str(r#"{"query":"q","backend":{"LOCAL":"c.jsonl"}}"#).unwrap();
        assert_eq!(r.backend, BackendChoice::Local("c.jsonl".into()));
        let r: SearchRequest = serde_json::from_str(r#"{"query":"q","backend":"REMOTE"}"#).unwrap();
        assert_eq!(r.backend, BackendChoice::Remote);
        assert!(serde_json::from_str::<SearchRequest>(r#"{"query":"q","kk":1}"#).is_err());
    }

    #[test]
    fn local_search_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let deps = deps(dir.path());
        let corpus = write_corpus(dir.path(), 8);
        let mut req = SearchRequest::new("catgut sutures for infection");
        req.backend = BackendChoice::Local(corpus);
        req.n_min = Some(3);
        let resp = run_search(&req, &deps).unwrap();
        assert_eq!(resp.results.len(), 5);
        assert!(crate::query::parse_query(&resp.rendered_query).is_ok());
        let stored = deps.store.session(&resp.query_id).unwrap();
        assert_eq!(stored.rendered_query, resp.rendered_query);
        assert_eq!(stored.ranked_article_ids.len(), 5);
        assert_eq!(stored.k, 5);
        assert_eq!(stored.n_min, 3);
        assert_eq!(resp.trace.last().unwrap().rendered_query, resp.rendered_query);
    }

    #[test]
    fn missing_corpus_is_retrieve_stage_client_error() {
        let dir = tempfile::tempdir().unwrap();
        let deps = deps(dir.path());
        let mut req = SearchRequest::new("catgut");
        req.backend = BackendChoice::Local(dir.path().join("nope.jsonl"));
        let err = run_search(&req, &deps).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Retrieve));
        assert!(err.is_client_error());
    }

    #[test]
    fn remote_without_backend_fails_at_retrieve() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_search(&SearchRequest::new("catgut"), &deps(dir.path())).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Retrieve));
    }

    #[test]
    fn stopword_only_query_fails_at_expand() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_search(&SearchRequest::new("of the and"), &deps(dir.path())).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Expand));
        assert_eq!(err.to_string(), "expand stage failed: no entities to expand");
    }

    #[test]
    fn health_reports_fallbacks() {
        let dir = tempfile::tempdir().unwrap();
        let s = deps(dir.path()).provider_status();
        assert_eq!((s.ner.as_str(), s.mlm.as_str(), s.embedding.as_str()), ("fallback", "fallback", "fallback"));
    }
}
