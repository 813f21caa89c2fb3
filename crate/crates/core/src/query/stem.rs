use std::collections::HashMap;
use std::sync::OnceLock;

const RULES: &str = include_str!("../../data/stem_rules.tsv");
const EXCEPTIONS: &str = include_str!("../../data/stem_exceptions.tsv");
const MIN_STEM_CHARS: usize = 4;

struct StemTable {
    /// (suffix, replacement), longest suffix first.
    rules: Vec<(String, String)>,
    exceptions: HashMap<String, String>,
}

fn table_rows(src: &str) -> impl Iterator<Item = (String, String)> + '_ {
    src.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut cols = l.splitn(2, '\t');
            let key = cols.next().unwrap_or_default().trim().to_string();
            let value = cols.next().unwrap_or_default().trim().to_string();
            (key, value)
        })
}

fn table() -> &'static StemTable {
    static TABLE: OnceLock<StemTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rules: Vec<_> = table_rows(RULES).collect();
        rules.sort_by_key(|r| std::cmp::Reverse(r.0.chars().count()));
        StemTable {
            rules,
            exceptions: table_rows(EXCEPTIONS).collect(),
        }
    })
}

/// Lowercased truncation stem for a single alphabetic word, or `None` when no
/// override or suffix rule covers it.
pub fn wildcard_stem(word: &str) -> Option<String> {
    if word.is_empty() || !word.chars().all(char::is_alphabetic) {
        return None;
    }
    let lower = word.to_lowercase();
    let table = table();
    if let Some(stem) = table.exceptions.get(&lower) {
        return Some(stem.clone());
    }
    table.rules.iter().find_map(|(suffix, replacement)| {
        let base = lower.strip_suffix(suffix.as_str())?;
        let stem = format!("{base}{replacement}");
        (stem.chars().count() >= MIN_STEM_CHARS).then_some(stem)
    })
}
