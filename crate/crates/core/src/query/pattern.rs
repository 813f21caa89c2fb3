use crate::text::{normalize_label, token_strings};

use super::{FieldTag, TaggedTerm};

/// Matching semantics of one tagged term.
///
/// Title/abstract terms are token sequences that must appear contiguously;
/// a wildcard makes the last token a prefix match. Heading terms compare
/// against whole controlled-vocabulary entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermPattern {
    tag: FieldTag,
    tokens: Vec<String>,
    heading: String,
    prefix_last: bool,
}

impl TermPattern {
    pub fn new(term: &TaggedTerm) -> Self {
        TermPattern {
            tag: term.tag(),
            tokens: token_strings(term.text()),
            heading: normalize_label(term.text()),
            prefix_last: term.is_wildcard(),
        }
    }

    pub fn tag(&self) -> FieldTag {
        self.tag
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_prefix(&self) -> bool {
        self.prefix_last
    }

    /// Whether the pattern's token sequence starts at `start` in `tokens`.
    pub fn matches_at<S: AsRef<str>>(&self, tokens: &[S], start: usize) -> bool {
        let n = self.tokens.len();
        if n == 0 || start + n > tokens.len() {
            return false;
        }
        self.tokens.iter().enumerate().all(|(i, want)| {
            let have = tokens[start + i].as_ref();
            if self.prefix_last && i == n - 1 {
                have.starts_with(want.as_str())
            } else {
                have == want
            }
        })
    }

    /// Start indices of every occurrence in `tokens`.
    pub fn occurrences<'a, S: AsRef<str>>(&'a self, tokens: &'a [S]) -> impl Iterator<Item = usize> + 'a {
        (0..tokens.len()).filter(move |&i| self.matches_at(tokens, i))
    }

    pub fn matches_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        self.occurrences(tokens).next().is_some()
    }

    pub fn matches_heading(&self, heading: &str) -> bool {
        if self.heading.is_empty() {
            return false;
        }
        let heading = normalize_label(heading);
        if self.prefix_last {
            heading.starts_with(&self.heading)
        } else {
            heading == self.heading
        }
    }
}
