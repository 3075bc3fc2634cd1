use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::corpus::{DefaultTokenizer, TokenSequence, Tokenizer};
use crate::error::{Error, Result};

/// Known multi-token surface forms per label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    forms: BTreeMap<String, BTreeSet<Vec<String>>>,
    /// Compare lowercased token text.
    pub case_insensitive: bool,
}

/// One occurrence of a form in a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GazetteerHit<'a> {
    pub start: usize,
    pub end: usize,
    pub label: &'a str,
}

impl Gazetteer {
    pub fn new(case_insensitive: bool) -> Self {
        Self {
            forms: BTreeMap::new(),
            case_insensitive,
        }
    }

    fn norm(&self, w: &str) -> String {
        if self.case_insensitive {
            w.to_lowercase()
        } else {
            w.to_string()
        }
    }

    /// Adds a form given as already-split tokens. Empty forms are ignored.
    pub fn insert_tokens<S: AsRef<str>>(&mut self, label: &str, form: &[S]) {
        if form.is_empty() {
            return;
        }
        let f = form.iter().map(|w| self.norm(w.as_ref())).collect();
        self.forms.entry(label.to_string()).or_default().insert(f);
    }

    /// Adds a form written as text; it is split with the default tokenizer.
    pub fn insert(&mut self, label: &str, surface: &str) {
        let toks = DefaultTokenizer.tokenize(surface);
        self.insert_tokens(label, &toks.texts());
    }

    /// Parses `label<TAB>surface form` lines; blank lines and `#` comments
    /// are skipped.
    pub fn parse(text: &str, case_insensitive: bool) -> Result<Self> {
        let mut g = Self::new(case_insensitive);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((l, f)) if !l.trim().is_empty() && !f.trim().is_empty() => g.insert(l.trim(), f.trim()),
                _ => {
                    return Err(Error::MalformedLine {
                        line: i + 1,
                        content: line.to_string(),
                    })
                }
            }
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>, case_insensitive: bool) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, case_insensitive)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.forms.keys().map(String::as_str)
    }

    pub fn forms(&self, label: &str) -> impl Iterator<Item = &Vec<String>> {
        self.forms.get(label).into_iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.forms.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every occurrence of every form, sorted by (start, end, label).
    pub fn find_all(&self, tokens: &TokenSequence) -> Vec<GazetteerHit<'_>> {
        let words: Vec<String> = tokens.iter().map(|t| self.norm(&t.text)).collect();
        let mut out = Vec::new();
        for (label, forms) in &self.forms {
            for f in forms {
                if f.len() > words.len() {
                    continue;
                }
                for s in 0..=words.len() - f.len() {
                    if words[s..s + f.len()] == f[..] {
                        out.push(GazetteerHit {
                            start: s,
                            end: s + f.len(),
                            label,
                        });
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}
