//! Rendering to and parsing from the PubMed query string form.

use thiserror::Error;

use super::{BooleanQuery, FieldTag, OrGroup, TaggedTerm};

/// `(` group `) AND (` group `)`; terms inside a group are joined by ` OR `.
pub fn render(query: &BooleanQuery) -> String {
    query
        .groups()
        .iter()
        .map(|g| {
            let terms: Vec<String> = g.terms().iter().map(ToString::to_string).collect();
            format!("({})", terms.join(" OR "))
        })
        .collect::<Vec<_>>()
        .join(" AND ")
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error at {position}: expected {expected}")]
pub struct ParseError {
    /// Byte offset into the input; equals the input length at end of input.
    pub position: usize,
    pub expected: String,
}

/// Parses the dialect produced by [`render`]. Whitespace between tokens is free
/// (line breaks included); `AND`/`OR` and tag names are case-insensitive.
pub fn parse_query(input: &str) -> Result<BooleanQuery, ParseError> {
    check_balance(input)?;
    let mut p = Parser { src: input, pos: 0 };
    let mut groups = vec![p.group()?];
    loop {
        p.skip_ws();
        if p.at_end() {
            break;
        }
        p.keyword("AND")?;
        groups.push(p.group()?);
    }
    Ok(BooleanQuery::new(groups).expect("at least one group parsed"))
}

/// Unclosed groups are reported at end of input rather than at the first
/// token that fails to continue the group.
fn check_balance(input: &str) -> Result<(), ParseError> {
    let mut depth = 0usize;
    let mut in_quote = false;
    for (idx, c) in input.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '(' if !in_quote => depth += 1,
            ')' if !in_quote => {
                if depth == 0 {
                    return Err(ParseError {
                        position: idx,
                        expected: "'(' before ')'".into(),
                    });
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    if depth > 0 {
        return Err(ParseError {
            position: input.len(),
            expected: "')'".into(),
        });
    }
    Ok(())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.pos,
            expected: expected.to_string(),
        })
    }

    fn expect_char(&mut self, c: char, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let rest = self.rest();
        let matches = rest.len() >= kw.len()
            && rest.is_char_boundary(kw.len())
            && rest[..kw.len()].eq_ignore_ascii_case(kw)
            && rest[kw.len()..]
                .chars()
                .next()
                .is_none_or(|c| c.is_whitespace() || c == '(');
        if matches {
            self.pos += kw.len();
            Ok(())
        } else {
            self.fail(kw)
        }
    }

    fn group(&mut self) -> Result<OrGroup, ParseError> {
        self.skip_ws();
        self.expect_char('(', "'('")?;
        let mut terms = vec![self.term()?];
        loop {
            self.skip_ws();
            if self.peek() == Some(')') {
                self.pos += 1;
                break;
            }
            if self.at_end() {
                return self.fail("'OR' or ')'");
            }
            self.keyword("OR")?;
            terms.push(self.term()?);
        }
        Ok(OrGroup::new(terms).expect("at least one term parsed"))
    }

    fn term(&mut self) -> Result<TaggedTerm, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let (text, quoted, wildcard) = if self.peek() == Some('"') {
            self.pos += 1;
            let Some(close) = self.rest().find('"') else {
                self.pos = self.src.len();
                return self.fail("closing '\"'");
            };
            let text = &self.rest()[..close];
            self.pos += close + 1;
            (text, true, false)
        } else {
            let len = self
                .rest()
                .find(|c: char| c.is_whitespace() || super::RESERVED.contains(&c))
                .unwrap_or(self.rest().len());
            if len == 0 {
                return self.fail("term");
            }
            let text = &self.rest()[..len];
            self.pos += len;
            let wildcard = self.peek() == Some('*');
            if wildcard {
                self.pos += 1;
            }
            (text, false, wildcard)
        };
        let tag = self.tag()?;
        TaggedTerm::new(text, tag, quoted, wildcard).map_err(|_| ParseError {
            position: start,
            expected: "valid term".into(),
        })
    }

    fn tag(&mut self) -> Result<FieldTag, ParseError> {
        self.expect_char('[', "'[' field tag")?;
        let Some(close) = self.rest().find(']') else {
            return self.fail("']'");
        };
        let name = &self.rest()[..close];
        let tag = match name.to_ascii_lowercase().as_str() {
            "tiab" => FieldTag::Tiab,
            "mesh" | "mh" => FieldTag::Mesh,
            _ => return self.fail("field tag tiab or Mesh"),
        };
        self.pos += close + 1;
        Ok(tag)
    }
}
