//! Texts, tokens, BIO tags and entity spans, plus the CoNLL and JSONL readers.
//!
//! Offsets are byte offsets into the UTF-8 raw text. Spans are half-open token
//! ranges `[start, end)`.

mod bio;
mod conll;
mod jsonl;
mod tokenize;

pub use bio::{bio_to_spans, spans_to_bio, Tag, TagSequence};
pub use conll::{read_conll, write_conll, write_conll_with, SpanSet};
pub use jsonl::{read_jsonl, read_jsonl_with, write_jsonl, JsonEntity, JsonRecord};
pub use tokenize::{DefaultTokenizer, Tokenizer};

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One token of a raw text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    /// Byte offset of the first byte.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
}

/// Tokens of one text, in order, with strictly increasing non-overlapping ranges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<Token>,
}

impl TokenSequence {
    /// Checks ordering and that every token slice of `raw` equals its text.
    pub fn new(raw: &str, tokens: Vec<Token>) -> Result<Self> {
        let mut prev_end = 0;
        for (i, t) in tokens.iter().enumerate() {
            let ok = !t.text.is_empty()
                && t.start < t.end
                && t.start >= prev_end
                && raw.get(t.start..t.end) == Some(t.text.as_str());
            if !ok {
                return Err(Error::Config(format!(
                    "token {i} ({:?} at {}..{}) does not match the raw text",
                    t.text, t.start, t.end
                )));
            }
            prev_end = t.end;
        }
        Ok(Self { tokens })
    }

    pub(crate) fn from_raw_parts(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    /// Joins words with single spaces and returns the raw text with its tokens.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> (String, Self) {
        let mut raw = String::new();
        let mut tokens = Vec::with_capacity(words.len());
        for w in words {
            if !raw.is_empty() {
                raw.push(' ');
            }
            let start = raw.len();
            raw.push_str(w.as_ref());
            tokens.push(Token {
                text: w.as_ref().to_string(),
                start,
                end: raw.len(),
            });
        }
        (raw, Self { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Index of the token starting at byte `offset`, if any.
    pub fn token_starting_at(&self, offset: usize) -> Option<usize> {
        self.tokens.binary_search_by_key(&offset, |t| t.start).ok()
    }

    /// Index of the token ending at byte `offset`, if any.
    pub fn token_ending_at(&self, offset: usize) -> Option<usize> {
        self.tokens.binary_search_by_key(&offset, |t| t.end).ok()
    }

    /// Surface text of the token range `[start, end)` joined by single spaces.
    pub fn surface(&self, start: usize, end: usize) -> String {
        self.tokens[start..end]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Index<usize> for TokenSequence {
    type Output = Token;
    fn index(&self, i: usize) -> &Token {
        &self.tokens[i]
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a Token;
    type IntoIter = std::slice::Iter<'a, Token>;
    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

/// Which component produced a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Rule,
    Model,
    Post,
}

impl Source {
    /// RULE > POST > MODEL.
    pub fn priority(self) -> u8 {
        match self {
            Source::Rule => 2,
            Source::Post => 1,
            Source::Model => 0,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Rule => "RULE",
            Source::Model => "MODEL",
            Source::Post => "POST",
        })
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RULE" => Ok(Source::Rule),
            "MODEL" => Ok(Source::Model),
            "POST" => Ok(Source::Post),
            other => Err(Error::Config(format!("unknown span source {other:?}"))),
        }
    }
}

/// A typed token range `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub source: Source,
    pub confidence: f64,
}

impl EntitySpan {
    /// A span with source MODEL and confidence 1.0.
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: label.into(),
            source: Source::Model,
            confidence: 1.0,
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &EntitySpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// `(start, end, label)`, the identity used for exact-match scoring.
    pub fn key(&self) -> (usize, usize, &str) {
        (self.start, self.end, self.label.as_str())
    }
}

/// Returns an error naming the first overlapping pair, if any.
pub fn check_non_overlapping(spans: &[EntitySpan]) -> Result<()> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for w in sorted.windows(2) {
        if w[0].overlaps(w[1]) {
            return Err(Error::OverlappingSpans(w[0].start, w[0].end, w[1].start, w[1].end));
        }
    }
    Ok(())
}

/// Sorts spans by `(start, end, label)`.
pub fn sort_spans(spans: &mut [EntitySpan]) {
    spans.sort_by(|a, b| a.key().cmp(&b.key()));
}

/// One text with its tokens and optional gold / predicted spans.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub raw: String,
    pub tokens: TokenSequence,
    pub gold: Option<Vec<EntitySpan>>,
    pub predicted: Option<Vec<EntitySpan>>,
}

impl Record {
    /// Tokenizes `raw` with the default tokenizer; no annotations.
    pub fn from_text(id: impl Into<String>, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = DefaultTokenizer.tokenize(&raw);
        Self {
            id: id.into(),
            raw,
            tokens,
            gold: None,
            predicted: None,
        }
    }

    /// Builds a record from pre-split words joined by single spaces.
    pub fn from_words<S: AsRef<str>>(
        id: impl Into<String>,
        words: &[S],
        gold: Option<Vec<EntitySpan>>,
    ) -> Self {
        let (raw, tokens) = TokenSequence::from_words(words);
        Self {
            id: id.into(),
            raw,
            tokens,
            gold,
            predicted: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks span bounds and that gold spans do not overlap.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for s in self.gold.iter().chain(self.predicted.iter()).flatten() {
            if s.start >= s.end || s.end > n {
                return Err(Error::SpanOutOfBounds {
                    start: s.start,
                    end: s.end,
                    len: n,
                });
            }
        }
        if let Some(g) = &self.gold {
            check_non_overlapping(g)?;
        }
        Ok(())
    }
}

/// On-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Conll,
    Jsonl,
    /// One raw text per line, no annotations.
    Text,
}

impl Format {
    /// Guessed from the extension: `.jsonl`/`.json`, `.txt`, anything else CoNLL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => Format::Jsonl,
            Some("txt") => Format::Text,
            _ => Format::Conll,
        }
    }
}

pub fn parse_corpus(text: &str, format: Format) -> Result<Vec<Record>> {
    match format {
        Format::Conll => read_conll(text),
        Format::Jsonl => read_jsonl(text),
        Format::Text => Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| Record::from_text(format!("line-{}", i + 1), l))
            .collect()),
    }
}

pub fn load_corpus(path: impl AsRef<std::path::Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    parse_corpus(&std::fs::read_to_string(path)?, Format::from_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_words_offsets_match_raw() {
        let (raw, toks) = TokenSequence::from_words(&["Ngân", "hàng", "BIDV"]);
        assert_eq!(raw, "Ngân hàng BIDV");
        for t in &toks {
            assert_eq!(&raw[t.start..t.end], t.text);
        }
        assert!(TokenSequence::new(&raw, toks.tokens().to_vec()).is_ok());
    }

    #[test]
    fn new_rejects_mismatched_offsets() {
        let bad = vec![Token {
            text: "ab".into(),
            start: 1,
            end: 3,
        }];
        assert!(TokenSequence::new("abc", bad).is_err());
    }

    #[test]
    fn record_validate_catches_overlap() {
        let r = Record::from_words(
            "r",
            &["a", "b", "c"],
            Some(vec![EntitySpan::new(0, 2, "A"), EntitySpan::new(1, 3, "B")]),
        );
        assert!(matches!(r.validate(), Err(Error::OverlappingSpans(..))));
    }
}
