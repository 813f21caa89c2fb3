//! Durable search sessions and librarian judgments, and the Relevance% metric.
//!
//! Both are append-only JSONL logs. Reads go through an in-memory index that
//! is rebuilt at startup; the latest record for a key wins.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::RankedArticle;
use crate::extract::SentinelArticle;

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("invalid feedback: {0}")]
    Invalid(String),
    #[error("storage error: {0}")]
    Storage(#[from] io::Error),
}

/// The fixed judgment categories, in form order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "Patient/Population/Problem")]
    Population,
    #[serde(rename = "Intervention/Exposure")]
    Intervention,
    #[serde(rename = "Comparison")]
    Comparison,
    #[serde(rename = "Outcome")]
    Outcome,
    #[serde(rename = "Study Design/Research Type")]
    StudyDesign,
    #[serde(rename = "Setting/Location")]
    Setting,
    #[serde(rename = "Phenomenon of Interest")]
    PhenomenonOfInterest,
    #[serde(rename = "Evaluation")]
    Evaluation,
    #[serde(rename = "Captured All Relevant Concepts")]
    CapturedAllConcepts,
    #[serde(rename = "Other")]
    Other,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Population,
        Category::Intervention,
        Category::Comparison,
        Category::Outcome,
        Category::StudyDesign,
        Category::Setting,
        Category::PhenomenonOfInterest,
        Category::Evaluation,
        Category::CapturedAllConcepts,
        Category::Other,
    ];
}

/// Checked state for every category. Serializes as a JSON object keyed by
/// category name and only deserializes when all ten keys are present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Category, bool>", into = "BTreeMap<Category, bool>")]
pub struct Categories(BTreeMap<Category, bool>);

impl Categories {
    pub fn none_checked() -> Self {
        Categories(Category::ALL.iter().map(|&c| (c, false)).collect())
    }

    pub fn with(mut self, category: Category, checked: bool) -> Self {
        self.0.insert(category, checked);
        self
    }

    pub fn is_checked(&self, category: Category) -> bool {
        self.0[&category]
    }
}

impl TryFrom<BTreeMap<Category, bool>> for Categories {
    type Error = String;
    fn try_from(map: BTreeMap<Category, bool>) -> Result<Self, Self::Error> {
        if map.len() != Category::ALL.len() {
            return Err(format!("expected all {} categories, got {}", Category::ALL.len(), map.len()));
        }
        Ok(Categories(map))
    }
}

impl From<Categories> for BTreeMap<Category, bool> {
    fn from(c: Categories) -> Self {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub query_id: String,
    pub article_id: String,
    pub relevant: bool,
    pub categories: Categories,
    #[serde(default)]
    pub missing_concepts: String,
    #[serde(rename = "ts", default = "Utc::now")]
    pub timestamp: DateTime<Utc>,
}

impl FeedbackRecord {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.query_id.trim().is_empty() {
            return Err(FeedbackError::Invalid("query_id is empty".into()));
        }
        if self.article_id.trim().is_empty() {
            return Err(FeedbackError::Invalid("article_id is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySession {
    pub query_id: String,
    pub query_text: String,
    #[serde(default)]
    pub sentinels: Vec<SentinelArticle>,
    pub rendered_query: String,
    pub ranked_article_ids: Vec<String>,
    #[serde(default)]
    pub results: Vec<RankedArticle>,
    /// Where the final query ran: `"remote"` or `"local:<corpus path>"`.
    #[serde(default)]
    pub backend: String,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub n_min: usize,
    #[serde(default)]
    pub graph_version: String,
    pub created: DateTime<Utc>,
}

impl QuerySession {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.query_id.trim().is_empty() {
            return Err(FeedbackError::Invalid("query_id is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.ranked_article_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(FeedbackError::Invalid(format!("ranked article id {dup} repeated")));
        }
        Ok(())
    }
}

/// Append-only JSONL file.
///
/// On open, a final line that is unterminated or does not parse is moved to
/// `<file>.quarantine` and cut off; unparsable complete lines elsewhere are
/// copied to the quarantine file and skipped.
#[derive(Debug)]
struct JsonlLog {
    path: PathBuf,
    writer: Mutex<File>,
}

impl JsonlLog {
    fn open<T: DeserializeOwned>(path: PathBuf) -> io::Result<(Self, Vec<T>)> {
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut records = Vec::new();
        let mut quarantine: Vec<u8> = Vec::new();
        let mut keep_len = 0;
        let mut start = 0;
        while start < bytes.len() {
            let (line, next, terminated) = match bytes[start..].iter().position(|&b| b == b'\n') {
                Some(off) => (&bytes[start..start + off], start + off + 1, true),
                None => (&bytes[start..], bytes.len(), false),
            };
            let parsed = std::str::from_utf8(line)
                .ok()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str::<T>);
            match parsed {
                Some(Ok(rec)) if terminated => {
                    records.push(rec);
                    keep_len = next;
                }
                None if terminated => keep_len = next,
                _ if terminated => {
                    log::warn!("{}: skipping unreadable record at byte {start}", path.display());
                    quarantine.extend_from_slice(line);
                    quarantine.push(b'\n');
                    keep_len = next;
                }
                _ => {
                    log::warn!("{}: quarantining truncated tail at byte {start}", path.display());
                    quarantine.extend_from_slice(line);
                    quarantine.push(b'\n');
                }
            }
            start = next;
        }
        if !quarantine.is_empty() {
            let mut q = OpenOptions::new()
                .create(true)
                .append(true)
                .open(quarantine_path(&path))?;
            q.write_all(&quarantine)?;
            q.sync_all()?;
        }
        if keep_len < bytes.len() {
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(keep_len as u64)?;
            f.sync_all()?;
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let writer = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((
            JsonlLog {
                path,
                writer: Mutex::new(writer),
            },
            records,
        ))
    }

    fn append<T: Serialize>(&self, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut w = self.writer.lock().expect("log writer lock poisoned");
        w.write_all(&line)?;
        w.sync_data()
    }
}

pub fn quarantine_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".quarantine");
    path.with_file_name(name)
}

#[derive(Debug, Default)]
struct Index {
    sessions: HashMap<String, QuerySession>,
    session_order: Vec<String>,
    feedback: HashMap<(String, String), FeedbackRecord>,
    feedback_lines: usize,
}

/// Sessions and feedback under one data directory
/// (`sessions.jsonl`, `feedback.jsonl`).
#[derive(Debug)]
pub struct FeedbackStore {
    sessions_log: JsonlLog,
    feedback_log: JsonlLog,
    index: RwLock<Index>,
}

impl FeedbackStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (sessions_log, sessions) = JsonlLog::open::<QuerySession>(dir.join("sessions.jsonl"))?;
        let (feedback_log, feedback) = JsonlLog::open::<FeedbackRecord>(dir.join("feedback.jsonl"))?;
        let mut index = Index::default();
        for s in sessions {
            index.insert_session(s);
        }
        index.feedback_lines = feedback.len();
        for f in feedback {
            index.feedback.insert((f.query_id.clone(), f.article_id.clone()), f);
        }
        Ok(FeedbackStore {
            sessions_log,
            feedback_log,
            index: RwLock::new(index),
        })
    }

    pub fn feedback_path(&self) -> &Path {
        &self.feedback_log.path
    }

    pub fn sessions_path(&self) -> &Path {
        &self.sessions_log.path
    }

    pub fn save_session(&self, session: &QuerySession) -> Result<(), FeedbackError> {
        session.validate()?;
        let mut index = self.index.write().expect("index lock poisoned");
        self.sessions_log.append(session)?;
        index.insert_session(session.clone());
        Ok(())
    }

    pub fn session(&self, query_id: &str) -> Option<QuerySession> {
        self.index.read().expect("index lock poisoned").sessions.get(query_id).cloned()
    }

    /// Appends a judgment. A later record for the same (query, article) pair
    /// supersedes earlier ones on read.
    pub fn record_feedback(&self, rec: &FeedbackRecord) -> Result<(), FeedbackError> {
        rec.validate()?;
        let mut index = self.index.write().expect("index lock poisoned");
        if !index.sessions.contains_key(&rec.query_id) {
            return Err(FeedbackError::UnknownSession(rec.query_id.clone()));
        }
        self.feedback_log.append(rec)?;
        index.feedback_lines += 1;
        index
            .feedback
            .insert((rec.query_id.clone(), rec.article_id.clone()), rec.clone());
        Ok(())
    }

    pub fn feedback(&self, query_id: &str, article_id: &str) -> Option<FeedbackRecord> {
        self.index
            .read()
            .expect("index lock poisoned")
            .feedback
            .get(&(query_id.to_string(), article_id.to_string()))
            .cloned()
    }

    /// Records appended to the feedback log so far, superseded ones included.
    pub fn feedback_log_len(&self) -> usize {
        self.index.read().expect("index lock poisoned").feedback_lines
    }

    pub fn relevance_percentage(&self, scope: &Scope) -> RelevanceReport {
        self.index.read().expect("index lock poisoned").report(scope)
    }

    /// Current judgments for one session, ordered by article id.
    pub fn feedback_for(&self, query_id: &str) -> Vec<FeedbackRecord> {
        let index = self.index.read().expect("index lock poisoned");
        let mut out: Vec<FeedbackRecord> = index
            .feedback
            .iter()
            .filter(|((q, _), _)| q == query_id)
            .map(|(_, r)| r.clone())
            .collect();
        out.sort_by(|a, b| a.article_id.cmp(&b.article_id));
        out
    }
}

/// Relevance report over recorded sessions and judgments without touching disk.
/// Later judgments for the same (query, article) pair win, as in the store.
pub fn offline_report(
    sessions: impl IntoIterator<Item = QuerySession>,
    judgments: impl IntoIterator<Item = FeedbackRecord>,
    scope: &Scope,
) -> Result<RelevanceReport, FeedbackError> {
    let mut index = Index::default();
    for s in sessions {
        s.validate()?;
        index.insert_session(s);
    }
    for j in judgments {
        j.validate()?;
        if !index.sessions.contains_key(&j.query_id) {
            return Err(FeedbackError::UnknownSession(j.query_id));
        }
        index.feedback_lines += 1;
        index.feedback.insert((j.query_id.clone(), j.article_id.clone()), j);
    }
    Ok(index.report(scope))
}

/// Every record of a JSONL file; blank lines are skipped and the first bad
/// line is reported with its number.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, FeedbackError> {
    let raw = fs::read_to_string(path)?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FeedbackError::Invalid(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

impl Index {
    fn report(&self, scope: &Scope) -> RelevanceReport {
        let ids: Vec<&String> = match scope {
            Scope::All => self.session_order.iter().collect(),
            Scope::Query(id) => self.sessions.get_key_value(id).map(|(k, _)| k).into_iter().collect(),
        };
        let mut judged: BTreeMap<&str, (usize, usize)> = ids.iter().map(|id| (id.as_str(), (0, 0))).collect();
        for ((qid, _), rec) in &self.feedback {
            if let Some(counts) = judged.get_mut(qid.as_str()) {
                counts.1 += 1;
                if rec.relevant {
                    counts.0 += 1;
                }
            }
        }
        let stats = judged.into_iter().map(|(qid, (relevant, judged))| {
            let retrieved = self.sessions[qid].ranked_article_ids.len();
            (qid.to_string(), relevant, judged, retrieved)
        });
        RelevanceReport::from_counts(stats)
    }

    fn insert_session(&mut self, s: QuerySession) {
        if !self.sessions.contains_key(&s.query_id) {
            self.session_order.push(s.query_id.clone());
        }
        self.sessions.insert(s.query_id.clone(), s);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    All,
    Query(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRatio {
    pub relevant: usize,
    pub judged: usize,
    pub retrieved: usize,
    /// Percent relevant among judged; absent when nothing was judged.
    pub ratio: Option<f64>,
    /// Judged share of retrieved articles, percent; absent when nothing was retrieved.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    /// Unweighted mean of per-query ratios over queries with judgments.
    pub overall: f64,
    /// Set when no query in scope has any judgment; `overall` is then 0.
    pub empty: bool,
    pub per_query: BTreeMap<String, QueryRatio>,
    pub judged_coverage: Option<f64>,
}

impl RelevanceReport {
    /// Builds a report from `(query_id, relevant, judged, retrieved)` counts.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, usize, usize, usize)>) -> Self {
        let mut per_query = BTreeMap::new();
        let (mut judged_total, mut retrieved_total) = (0, 0);
        for (qid, relevant, judged, retrieved) in counts {
            judged_total += judged;
            retrieved_total += retrieved;
            per_query.insert(
                qid,
                QueryRatio {
                    relevant,
                    judged,
                    retrieved,
                    ratio: (judged > 0).then(|| 100.0 * relevant as f64 / judged as f64),
                    coverage: (retrieved > 0).then(|| 100.0 * judged as f64 / retrieved as f64),
                },
            );
        }
        let ratios: Vec<f64> = per_query.values().filter_map(|q: &QueryRatio| q.ratio).collect();
        let empty = ratios.is_empty();
        let overall = if empty {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        RelevanceReport {
            overall,
            empty,
            per_query,
            judged_coverage: (retrieved_total > 0)
                .then(|| 100.0 * judged_total as f64 / retrieved_total as f64),
        }
    }
}
