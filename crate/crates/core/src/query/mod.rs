//! Boolean query AST in the PubMed field-tag dialect.
//!
//! A query is always a conjunction of disjunctive groups:
//! `("Gender"[tiab] OR gender*[tiab]) AND (catgut[tiab] OR "Sutures"[Mesh])`.

mod build;
mod dialect;
mod pattern;
mod refine;
mod stem;

pub use build::{
    build_specific_query, entity_relevance, expansion_variants, relevance_from_cosine,
    term_variants,
};
pub use dialect::{parse_query, render, ParseError};
pub use pattern::TermPattern;
pub use refine::{refine_until, RefineError, Refinement, RefinementTrace, TraceIteration};
pub use stem::wildcard_stem;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FieldTag {
    /// Title/abstract free text.
    Tiab,
    /// Controlled-vocabulary heading.
    Mesh,
}

impl FieldTag {
    /// Tag text as it appears between the brackets.
    pub fn as_str(self) -> &'static str {
        match self {
            FieldTag::Tiab => "tiab",
            FieldTag::Mesh => "Mesh",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("expansion set has no entries")]
    EmptyExpansion,
    #[error("invalid term {text:?}: {reason}")]
    InvalidTerm { text: String, reason: &'static str },
    #[error("a query needs at least one group and every group at least one term")]
    EmptyGroup,
}

const RESERVED: &[char] = &['(', ')', '[', ']', '"', '*'];

/// Whether `text` can be written without quotes: one whitespace-free word
/// with no dialect punctuation.
pub fn is_bare_word(text: &str) -> bool {
    !text.is_empty() && !text.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTerm")]
pub struct TaggedTerm {
    text: String,
    tag: FieldTag,
    quoted: bool,
    wildcard: bool,
}

#[derive(Deserialize)]
struct RawTerm {
    text: String,
    tag: FieldTag,
    quoted: bool,
    wildcard: bool,
}

impl TryFrom<RawTerm> for TaggedTerm {
    type Error = QueryError;
    fn try_from(raw: RawTerm) -> Result<Self, Self::Error> {
        TaggedTerm::new(raw.text, raw.tag, raw.quoted, raw.wildcard)
    }
}

impl TaggedTerm {
    /// For wildcard terms `text` is the stem; the `*` is added on render.
    pub fn new(
        text: impl Into<String>,
        tag: FieldTag,
        quoted: bool,
        wildcard: bool,
    ) -> Result<Self, QueryError> {
        let text = text.into();
        let invalid = |reason| QueryError::InvalidTerm {
            text: text.clone(),
            reason,
        };
        if text.trim().is_empty() {
            return Err(invalid("empty text"));
        }
        if text.trim() != text {
            return Err(invalid("leading or trailing whitespace"));
        }
        if text.contains('"') {
            return Err(invalid("double quote inside term"));
        }
        if wildcard && quoted {
            return Err(invalid("wildcard terms cannot be quoted"));
        }
        if !quoted && !is_bare_word(&text) {
            return Err(invalid("unquoted terms must be a single bare word"));
        }
        Ok(TaggedTerm {
            text,
            tag,
            quoted,
            wildcard,
        })
    }

    pub fn quoted(text: impl Into<String>, tag: FieldTag) -> Result<Self, QueryError> {
        Self::new(text, tag, true, false)
    }

    pub fn plain(text: impl Into<String>, tag: FieldTag) -> Result<Self, QueryError> {
        Self::new(text, tag, false, false)
    }

    pub fn wildcard(stem: impl Into<String>, tag: FieldTag) -> Result<Self, QueryError> {
        Self::new(stem, tag, false, true)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tag(&self) -> FieldTag {
        self.tag
    }

    pub fn is_quoted(&self) -> bool {
        self.quoted
    }

    pub fn is_wildcard(&self) -> bool {
        self.wildcard
    }
}

impl fmt::Display for TaggedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.quoted {
            write!(f, "\"{}\"", self.text)?;
        } else {
            f.write_str(&self.text)?;
            if self.wildcard {
                f.write_str("*")?;
            }
        }
        write!(f, "[{}]", self.tag.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrGroup {
    terms: Vec<TaggedTerm>,
}

impl OrGroup {
    pub fn new(terms: Vec<TaggedTerm>) -> Result<Self, QueryError> {
        if terms.is_empty() {
            return Err(QueryError::EmptyGroup);
        }
        Ok(OrGroup { terms })
    }

    pub fn terms(&self) -> &[TaggedTerm] {
        &self.terms
    }
}

/// AND over OR groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanQuery {
    groups: Vec<OrGroup>,
}

impl BooleanQuery {
    pub fn new(groups: Vec<OrGroup>) -> Result<Self, QueryError> {
        if groups.is_empty() {
            return Err(QueryError::EmptyGroup);
        }
        Ok(BooleanQuery { groups })
    }

    pub fn groups(&self) -> &[OrGroup] {
        &self.groups
    }

    pub fn terms(&self) -> impl Iterator<Item = &TaggedTerm> {
        self.groups.iter().flat_map(|g| g.terms.iter())
    }
}

impl fmt::Display for BooleanQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}
