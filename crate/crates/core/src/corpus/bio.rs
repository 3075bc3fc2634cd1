use std::fmt;
use std::str::FromStr;

use super::EntitySpan;
use crate::error::{Error, Result};

/// A BIO tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(String),
    I(String),
}

impl Tag {
    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::O => None,
            Tag::B(l) | Tag::I(l) => Some(l),
        }
    }

    /// Same prefix, label replaced.
    pub fn map_label(&self, f: impl FnOnce(&str) -> String) -> Tag {
        match self {
            Tag::O => Tag::O,
            Tag::B(l) => Tag::B(f(l)),
            Tag::I(l) => Tag::I(f(l)),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(l) => write!(f, "B-{l}"),
            Tag::I(l) => write!(f, "I-{l}"),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Tag::O),
            _ => match s.split_once('-') {
                Some(("B", l)) if !l.is_empty() => Ok(Tag::B(l.to_string())),
                Some(("I", l)) if !l.is_empty() => Ok(Tag::I(l.to_string())),
                _ => Err(Error::UnknownLabel(s.to_string())),
            },
        }
    }
}

/// Per-token tags of one sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagSequence(pub Vec<Tag>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tag> {
        self.0.iter()
    }

    /// True when no `I-l` follows `O`, the sequence start, or a tag of another label.
    pub fn is_valid_bio(&self) -> bool {
        let mut open: Option<&str> = None;
        for t in &self.0 {
            match t {
                Tag::O => open = None,
                Tag::B(l) => open = Some(l),
                Tag::I(l) => {
                    if open != Some(l.as_str()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Rewrites every orphan `I-l` as `B-l`.
    pub fn repaired(&self) -> TagSequence {
        let mut out = Vec::with_capacity(self.0.len());
        let mut open: Option<String> = None;
        for t in &self.0 {
            let fixed = match t {
                Tag::I(l) if open.as_deref() != Some(l) => Tag::B(l.clone()),
                other => other.clone(),
            };
            open = fixed.label().map(str::to_string);
            out.push(fixed);
        }
        TagSequence(out)
    }
}

impl FromIterator<Tag> for TagSequence {
    fn from_iter<I: IntoIterator<Item = Tag>>(iter: I) -> Self {
        TagSequence(iter.into_iter().collect())
    }
}

/// Encodes non-overlapping spans over a sequence of `n` tokens.
pub fn spans_to_bio(spans: &[EntitySpan], n: usize) -> Result<TagSequence> {
    let mut tags = vec![Tag::O; n];
    let mut taken = vec![false; n];
    for s in spans {
        if s.start >= s.end || s.end > n {
            return Err(Error::SpanOutOfBounds {
                start: s.start,
                end: s.end,
                len: n,
            });
        }
        if let Some(i) = (s.start..s.end).find(|&i| taken[i]) {
            let other = spans
                .iter()
                .find(|o| o.start <= i && i < o.end && !std::ptr::eq(*o, s))
                .expect("taken slot has an owner");
            return Err(Error::OverlappingSpans(other.start, other.end, s.start, s.end));
        }
        for i in s.start..s.end {
            taken[i] = true;
            tags[i] = if i == s.start {
                Tag::B(s.label.clone())
            } else {
                Tag::I(s.label.clone())
            };
        }
    }
    Ok(TagSequence(tags))
}

/// Decodes tags into spans sorted by start, treating an orphan `I-l` as `B-l`.
pub fn bio_to_spans(tags: &TagSequence) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, t) in tags.0.iter().enumerate() {
        match t {
            Tag::I(l) if open.is_some_and(|(_, ol)| ol == l) => {}
            Tag::O => {
                if let Some((s, l)) = open.take() {
                    spans.push(EntitySpan::new(s, i, l));
                }
            }
            Tag::B(l) | Tag::I(l) => {
                if let Some((s, ol)) = open.take() {
                    spans.push(EntitySpan::new(s, i, ol));
                }
                open = Some((i, l));
            }
        }
    }
    if let Some((s, l)) = open {
        spans.push(EntitySpan::new(s, tags.0.len(), l));
    }
    spans
}
