//! Minimal E-utilities client: `esearch` for ids and `efetch` for abstracts.

use std::collections::{HashMap, HashSet};
use std::thread;
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::{StatusCode, Url};
use serde::{Deserialize, Serialize};

use super::{Article, BackendError, FetchOutcome, RateLimiter, SearchBackend, SearchHits};
use crate::query::BooleanQuery;

pub const DEFAULT_BASE_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EntrezConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub requests_per_second: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff_ms: u64,
    pub timeout_ms: u64,
    pub fetch_chunk: usize,
}

impl Default for EntrezConfig {
    fn default() -> Self {
        EntrezConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            requests_per_second: 3.0,
            max_retries: 2,
            backoff_ms: 500,
            timeout_ms: 10_000,
            fetch_chunk: 200,
        }
    }
}

pub struct EntrezClient {
    config: EntrezConfig,
    http: Client,
    limiter: RateLimiter,
}

#[derive(Deserialize)]
struct EsearchEnvelope {
    esearchresult: EsearchResult,
}

#[derive(Deserialize)]
struct EsearchResult {
    #[serde(default)]
    count: Option<String>,
    #[serde(default)]
    idlist: Vec<String>,
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

impl EntrezClient {
    pub fn new(config: EntrezConfig) -> Self {
        let http = Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .expect("HTTP client builds with static configuration");
        let limiter = RateLimiter::new(config.requests_per_second);
        EntrezClient { config, http, limiter }
    }

    pub fn config(&self) -> &EntrezConfig {
        &self.config
    }

    fn url(&self, endpoint: &str, params: &[(&str, &str)]) -> Result<Url, BackendError> {
        let base = format!("{}/{}", self.config.base_url.trim_end_matches('/'), endpoint);
        let mut params = params.to_vec();
        if let Some(key) = self.config.api_key.as_deref() {
            params.push(("api_key", key));
        }
        Url::parse_with_params(&base, &params).map_err(|e| BackendError::Transport(e.to_string()))
    }

    /// GET with rate limiting and retries on 429, 5xx and transport failures.
    fn get(&self, url: Url) -> Result<String, BackendError> {
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            let outcome = self.http.get(url.clone()).send();
            let retryable = match outcome {
                Ok(resp) if resp.status().is_success() => {
                    return resp.text().map_err(|e| BackendError::Transport(e.to_string()));
                }
                Ok(resp) => {
                    let status = resp.status();
                    let err = status_error(status, resp);
                    if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                        err
                    } else {
                        return Err(err);
                    }
                }
                Err(e) => BackendError::Transport(e.to_string()),
            };
            if attempt >= self.config.max_retries {
                return Err(retryable);
            }
            let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
            log::debug!("entrez request failed ({retryable}); retrying in {delay} ms");
            thread::sleep(Duration::from_millis(delay));
            attempt += 1;
        }
    }

    /// Ids for `rendered_query`, at most `retmax`, in backend order.
    pub fn esearch(&self, rendered_query: &str, retmax: usize) -> Result<SearchHits, BackendError> {
        let retmax = retmax.max(1);
        let retmax_s = retmax.to_string();
        let url = self.url(
            "esearch.fcgi",
            &[
                ("db", "pubmed"),
                ("term", rendered_query),
                ("retmax", &retmax_s),
                ("retmode", "json"),
            ],
        )?;
        let body = self.get(url)?;
        let env: EsearchEnvelope =
            serde_json::from_str(&body).map_err(|e| BackendError::Decode(e.to_string()))?;
        let mut ids = env.esearchresult.idlist;
        let total = env
            .esearchresult
            .count
            .and_then(|c| c.parse().ok())
            .unwrap_or(ids.len());
        ids.truncate(retmax);
        Ok(SearchHits { total, ids })
    }

    pub fn remote_search(&self, rendered_query: &str, retmax: usize) -> Result<Vec<String>, BackendError> {
        Ok(self.esearch(rendered_query, retmax)?.ids)
    }

    /// Articles for `ids` in input order; unresolved ids land in `missing`.
    /// Requests are chunked to `fetch_chunk` ids.
    pub fn efetch(&self, ids: &[String]) -> Result<FetchOutcome, BackendError> {
        let mut seen = HashSet::new();
        let unique: Vec<&String> = ids.iter().filter(|id| seen.insert(id.as_str())).collect();
        let mut found: HashMap<String, Article> = HashMap::new();
        for chunk in unique.chunks(self.config.fetch_chunk.max(1)) {
            let joined = chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",");
            let url = self.url(
                "efetch.fcgi",
                &[
                    ("db", "pubmed"),
                    ("id", &joined),
                    ("rettype", "abstract"),
                    ("retmode", "xml"),
                ],
            )?;
            let body = self.get(url)?;
            for a in parse_pubmed_xml(&body)? {
                found.insert(a.external_id.clone(), a);
            }
        }
        let mut out = FetchOutcome::default();
        for id in unique {
            match found.remove(id.as_str()) {
                Some(a) => out.articles.push(a),
                None => out.missing.push(id.clone()),
            }
        }
        Ok(out)
    }

    pub fn remote_fetch(&self, ids: &[String]) -> Result<FetchOutcome, BackendError> {
        self.efetch(ids)
    }
}

fn status_error(status: StatusCode, resp: Response) -> BackendError {
    if status == StatusCode::TOO_MANY_REQUESTS {
        return BackendError::RateLimited;
    }
    BackendError::Http {
        status: status.as_u16(),
        body: excerpt(&resp.text().unwrap_or_default()),
    }
}

impl SearchBackend for EntrezClient {
    fn search(&self, _query: &BooleanQuery, rendered: &str, limit: usize) -> Result<SearchHits, BackendError> {
        self.esearch(rendered, limit)
    }

    fn fetch(&self, ids: &[String]) -> Result<FetchOutcome, BackendError> {
        self.efetch(ids)
    }
}

fn all_text(node: roxmltree::Node<'_, '_>) -> String {
    let raw: String = node
        .descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

/// Extracts articles from a `PubmedArticleSet` document.
pub(crate) fn parse_pubmed_xml(xml: &str) -> Result<Vec<Article>, BackendError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| BackendError::Decode(e.to_string()))?;
    let mut out = Vec::new();
    for pa in doc.descendants().filter(|n| n.has_tag_name("PubmedArticle")) {
        let Some(citation) = child(pa, "MedlineCitation") else {
            continue;
        };
        let Some(pmid) = child(citation, "PMID").map(all_text).filter(|s| !s.is_empty()) else {
            continue;
        };
        let article = child(citation, "Article");
        let title = article
            .and_then(|a| child(a, "ArticleTitle"))
            .map(all_text)
            .unwrap_or_default();
        let abstract_text = article
            .and_then(|a| child(a, "Abstract"))
            .map(|abs| {
                abs.children()
                    .filter(|n| n.has_tag_name("AbstractText"))
                    .map(all_text)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        let journal = article
            .and_then(|a| child(a, "Journal"))
            .and_then(|j| child(j, "Title"))
            .map(all_text);
        let mesh_terms = child(citation, "MeshHeadingList")
            .map(|list| {
                list.children()
                    .filter(|n| n.has_tag_name("MeshHeading"))
                    .filter_map(|h| child(h, "DescriptorName"))
                    .map(all_text)
                    .collect()
            })
            .unwrap_or_default();
        out.push(Article {
            external_id: pmid,
            title: if title.is_empty() { "(untitled)".to_string() } else { title },
            abstract_text,
            mesh_terms,
            journal,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XML: &str = r#"<?xml version="1.0" ?>
<PubmedArticleSet>
 <PubmedArticle>
  <MedlineCitation Status="MEDLINE">
   <PMID Version="1">111</PMID>
   <Article>
    <Journal><Title>Aesthetic surgery journal</Title></Journal>
    <ArticleTitle>Female-to-Male <i>Chest</i> Reconstruction</ArticleTitle>
    <Abstract>
     <AbstractText Label="BACKGROUND">First part.</AbstractText>
     <AbstractText Label="METHODS">Second   part.</AbstractText>
    </Abstract>
   </Article>
   <MeshHeadingList>
    <MeshHeading><DescriptorName UI="D063106">Sex Reassignment Surgery</DescriptorName></MeshHeading>
    <MeshHeading><DescriptorName UI="D063107">Transgender Persons</DescriptorName><QualifierName>surgery</QualifierName></MeshHeading>
   </MeshHeadingList>
  </MedlineCitation>
 </PubmedArticle>
 <PubmedArticle>
  <MedlineCitation><PMID>222</PMID><Article><ArticleTitle>No abstract</ArticleTitle></Article></MedlineCitation>
 </PubmedArticle>
</PubmedArticleSet>"#;

    #[test]
    fn parses_articles() {
        let arts = parse_pubmed_xml(XML).unwrap();
        assert_eq!(arts.len(), 2);
        assert_eq!(arts[0].external_id, "111");
        assert_eq!(arts[0].title, "Female-to-Male Chest Reconstruction");
        assert_eq!(arts[0].abstract_text, "First part. Second part.");
        assert_eq!(arts[0].journal.as_deref(), Some("Aesthetic surgery journal"));
        assert_eq!(arts[0].mesh_terms, vec!["Sex Reassignment Surgery", "Transgender Persons"]);
        assert_eq!(arts[1].abstract_text, "");
    }

    #[test]
    fn malformed_xml_is_decode_error() {
        assert!(matches!(parse_pubmed_xml("<a>"), Err(BackendError::Decode(_))));
    }

    #[test]
    fn urls_carry_parameters() {
        let c = EntrezClient::new(EntrezConfig {
            base_url: "http://stub/eutils/".into(),
            api_key: Some("k".into()),
            ..EntrezConfig::default()
        });
        let u = c.url("esearch.fcgi", &[("term", "(a[tiab]) AND (b*[tiab])")]).unwrap();
        assert_eq!(u.path(), "/eutils/esearch.fcgi");
        let pairs: HashMap<_, _> = u.query_pairs().into_owned().collect();
        assert_eq!(pairs["term"], "(a[tiab]) AND (b*[tiab])");
        assert_eq!(pairs["api_key"], "k");
    }
}
