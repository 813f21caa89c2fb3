#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use srsearch::config::Config;
use srsearch::query::{BooleanQuery, FieldTag, OrGroup, TaggedTerm};
use srsearch::retrieval::Article;
use srsearch::service::{BackendChoice, SearchRequest};

pub const GOLDEN_QUERY: &str = "Gender affirming surgeries for female-to-male transgender individuals.";

pub const GOLDEN_KEY: &str = "(\"Gender\"[tiab] OR Gender[tiab] OR gender*[tiab]) AND \
(\"surgeries\"[tiab] OR surgeries[tiab] OR surgeri*[tiab]) AND \
(\"female-to-male transgender\"[tiab] OR female[tiab] OR femal*[tiab] OR \
transgender[tiab] OR transgend*[tiab] OR Gender[tiab] OR gender*[tiab]) AND \
(\"individuals\"[tiab] OR individuals[tiab] OR individu*[tiab])";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// Golden-fixture config with its data directory moved under `data_dir`.
pub fn golden_config(data_dir: &Path) -> Config {
    let mut c = Config::load_with_env(fixture("golden/srsearch.toml"), |_| None).unwrap();
    c.data_dir = data_dir.to_path_buf();
    c
}

pub fn golden_request() -> SearchRequest {
    let raw = std::fs::read_to_string(fixture("golden/request.json")).unwrap();
    let mut req: SearchRequest = serde_json::from_str(&raw).unwrap();
    req.backend = BackendChoice::Local(fixture("golden/corpus.jsonl"));
    req
}

/// Serves `router` on an ephemeral port from a background thread.
pub fn spawn_stub(router: axum::Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// Lowercased alphanumeric runs, written out by hand for the oracles below.
pub fn naive_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn naive_field_match(field: &[String], want: &[String], prefix: bool) -> bool {
    if want.is_empty() || want.len() > field.len() {
        return false;
    }
    (0..=field.len() - want.len()).any(|s| {
        want.iter().enumerate().all(|(i, w)| {
            let have = &field[s + i];
            if prefix && i + 1 == want.len() {
                have.starts_with(w.as_str())
            } else {
                have == w
            }
        })
    })
}

/// Per-document boolean semantics: title and abstract are separate fields,
/// headings compare whole and case-insensitively.
pub fn naive_match(query: &BooleanQuery, a: &Article) -> bool {
    let title = naive_tokens(&a.title);
    let abs = naive_tokens(&a.abstract_text);
    query.groups().iter().all(|g| {
        g.terms().iter().any(|t| match t.tag() {
            FieldTag::Tiab => {
                let want = naive_tokens(t.text());
                naive_field_match(&title, &want, t.is_wildcard()) || naive_field_match(&abs, &want, t.is_wildcard())
            }
            FieldTag::Mesh => {
                let want = t.text().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
                a.mesh_terms.iter().any(|m| {
                    let m = m.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
                    if t.is_wildcard() {
                        m.starts_with(&want)
                    } else {
                        m == want
                    }
                })
            }
        })
    })
}

pub const VOCAB: &[&str] = &[
    "sutures", "suture", "catgut", "wound", "wounds", "infection", "infections", "infected", "antibiotic",
    "antibiotics", "surgery", "surgeries", "surgical", "gender", "female", "male", "transgender",
    "individuals", "patients", "outcomes", "trial", "cohort", "risk", "chest", "repair", "healing",
];

pub const HEADINGS: &[&str] = &[
    "Sutures", "Catgut", "Wound Infection", "Surgical Wound Infection", "Anti-Bacterial Agents",
    "Transgender Persons", "Sex Reassignment Surgery", "Gender Identity",
];

pub fn random_corpus(rng: &mut impl Rng, n: usize) -> Vec<Article> {
    (0..n)
        .map(|i| {
            let words = |rng: &mut _, len| {
                (0..len)
                    .map(|_| *VOCAB.choose(rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let tl = rng.random_range(3..8);
            let al = rng.random_range(5..30);
            let nm = rng.random_range(0..3);
            Article {
                external_id: format!("{i:05}"),
                title: words(rng, tl),
                abstract_text: words(rng, al),
                mesh_terms: (0..nm).map(|_| HEADINGS.choose(rng).unwrap().to_string()).collect(),
                journal: None,
            }
        })
        .collect()
}

pub fn random_term(rng: &mut impl Rng) -> TaggedTerm {
    if rng.random_bool(0.2) {
        let h = HEADINGS.choose(rng).unwrap();
        return if rng.random_bool(0.3) {
            let first = h.split(' ').next().unwrap();
            TaggedTerm::wildcard(&first[..first.len().min(5)], FieldTag::Mesh).unwrap()
        } else if h.contains(' ') || h.contains('-') {
            TaggedTerm::quoted(*h, FieldTag::Mesh).unwrap()
        } else {
            TaggedTerm::plain(*h, FieldTag::Mesh).unwrap()
        };
    }
    let w = VOCAB.choose(rng).unwrap();
    match rng.random_range(0..4) {
        0 => {
            let w2 = VOCAB.choose(rng).unwrap();
            TaggedTerm::quoted(format!("{w} {w2}"), FieldTag::Tiab).unwrap()
        }
        1 => TaggedTerm::wildcard(&w[..w.len().min(rng.random_range(3..7))], FieldTag::Tiab).unwrap(),
        2 => TaggedTerm::quoted(*w, FieldTag::Tiab).unwrap(),
        _ => TaggedTerm::plain(*w, FieldTag::Tiab).unwrap(),
    }
}

pub fn random_query(rng: &mut impl Rng) -> BooleanQuery {
    let groups = (0..rng.random_range(1..4))
        .map(|_| OrGroup::new((0..rng.random_range(1..4)).map(|_| random_term(rng)).collect()).unwrap())
        .collect();
    BooleanQuery::new(groups).unwrap()
}
