use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A run of characters from one alphabet with a length range.
#[derive(Debug, Clone)]
pub struct SegmentPattern {
    /// Body of a regex character class, e.g. `A-Z` or `A-Z0-9`.
    pub alphabet: String,
    pub min_len: usize,
    pub max_len: usize,
    prefix: Regex,
}

impl SegmentPattern {
    pub fn new(alphabet: &str, min_len: usize, max_len: usize) -> Result<Self> {
        if alphabet.is_empty() || min_len == 0 || min_len > max_len {
            return Err(Error::Config(format!(
                "segment pattern [{alphabet}]{{{min_len},{max_len}}} is empty or has a bad length range"
            )));
        }
        let prefix = Regex::new(&format!("^[{alphabet}]*"))
            .map_err(|e| Error::Config(format!("alphabet [{alphabet}]: {e}")))?;
        Ok(Self {
            alphabet: alphabet.to_string(),
            min_len,
            max_len,
            prefix,
        })
    }

    /// Byte lengths of the prefixes of `s` this segment can match, longest first.
    fn prefix_lengths(&self, s: &str) -> Vec<usize> {
        let run = self.prefix.find(s).map_or("", |m| m.as_str());
        let ends: Vec<usize> = run
            .char_indices()
            .map(|(i, c)| i + c.len_utf8())
            .collect();
        (self.min_len..=self.max_len.min(ends.len()))
            .rev()
            .map(|n| ends[n - 1])
            .collect()
    }

    fn full_match(&self, s: &str) -> bool {
        self.prefix_lengths(s).contains(&s.len())
    }
}

impl PartialEq for SegmentPattern {
    fn eq(&self, o: &Self) -> bool {
        self.alphabet == o.alphabet && self.min_len == o.min_len && self.max_len == o.max_len
    }
}

/// Serialized form of a [`SegmentPattern`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub alphabet: String,
    pub min: usize,
    pub max: usize,
}

impl TryFrom<&SegmentSpec> for SegmentPattern {
    type Error = Error;
    fn try_from(s: &SegmentSpec) -> Result<Self> {
        SegmentPattern::new(&s.alphabet, s.min, s.max)
    }
}

/// Shop code + routing segment + numeric tail.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCodeConfig {
    pub shop: SegmentPattern,
    pub routing: SegmentPattern,
    /// Empty means the segments are concatenated.
    pub delimiter: String,
}

/// 9 digits must not start with 0; 10 digits must start with 0 or 1; any other
/// length is rejected.
pub fn valid_tail(tail: &str) -> bool {
    if !tail.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    match tail.len() {
        9 => !tail.starts_with('0'),
        10 => tail.starts_with('0') || tail.starts_with('1'),
        _ => false,
    }
}

/// True iff `s` splits into shop, routing and a valid numeric tail.
///
/// Without a delimiter the segments are tried greedily from the left (longest
/// first, backing off) with the tail running to the end of the string.
pub fn validate_order_code(s: &str, cfg: &OrderCodeConfig) -> bool {
    if !cfg.delimiter.is_empty() {
        let parts: Vec<&str> = s.split(cfg.delimiter.as_str()).collect();
        return parts.len() == 3
            && cfg.shop.full_match(parts[0])
            && cfg.routing.full_match(parts[1])
            && valid_tail(parts[2]);
    }
    for shop_len in cfg.shop.prefix_lengths(s) {
        let rest = &s[shop_len..];
        for routing_len in cfg.routing.prefix_lengths(rest) {
            if valid_tail(&rest[routing_len..]) {
                return true;
            }
        }
    }
    false
}
