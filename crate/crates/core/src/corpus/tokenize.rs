use std::sync::LazyLock;

use regex::Regex;

use super::{Token, TokenSequence};

/// Splits raw text into tokens. Implementations must return byte offsets
/// falling on codepoint boundaries.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, raw: &str) -> TokenSequence;
}

// Anchored at the current position; a match only counts when it is followed by
// the end of the chunk or a punctuation character.
static PROTECTED: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        // dd/mm/yyyy, dd-mm-yyyy, dd/mm (also fractions such as 1/4)
        r"^\d{1,2}[/-]\d{1,2}[/-]\d{2,4}",
        r"^\d{1,2}/\d{1,2}",
        // hh:mm[:ss]
        r"^\d{1,2}:\d{2}(?::\d{2})?",
        // 2,16 / 3.700 / 618,000
        r"^\d+(?:[.,]\d+)+",
        // codes with internal hyphens or underscores: ABC-01-912345678, COVID-19
        r"^[\p{L}\p{N}]+(?:[-_][\p{L}\p{N}]+)+",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static pattern"))
    .collect()
});

pub(crate) fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}')
        || matches!(c, '«' | '»' | '¿' | '¡' | '…' | '“' | '”' | '‘' | '’')
}

/// Whitespace splitting, then punctuation split off into one-character
/// tokens. Dates, clock times, decimal numbers and hyphenated codes that
/// contain a digit stay whole.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultTokenizer;

impl DefaultTokenizer {
    fn protected_len(rest: &str) -> Option<usize> {
        let mut best = None;
        for (i, re) in PROTECTED.iter().enumerate() {
            let Some(m) = re.find(rest) else { continue };
            let len = m.end();
            // the code pattern needs at least one digit
            if i == PROTECTED.len() - 1 && !rest[..len].chars().any(|c| c.is_numeric()) {
                continue;
            }
            let boundary_ok = rest[len..].chars().next().is_none_or(is_punct);
            if boundary_ok && best.is_none_or(|b| len > b) {
                best = Some(len);
            }
        }
        best
    }

    fn split_chunk(chunk: &str, base: usize, out: &mut Vec<Token>) {
        let mut pos = 0;
        while pos < chunk.len() {
            let rest = &chunk[pos..];
            let c = rest.chars().next().unwrap();
            let len = if is_punct(c) {
                c.len_utf8()
            } else {
                Self::protected_len(rest).unwrap_or_else(|| rest.find(is_punct).unwrap_or(rest.len()))
            };
            out.push(Token {
                text: rest[..len].to_string(),
                start: base + pos,
                end: base + pos + len,
            });
            pos += len;
        }
    }
}

impl Tokenizer for DefaultTokenizer {
    fn tokenize(&self, raw: &str) -> TokenSequence {
        let mut tokens = Vec::new();
        let mut chunk_start = None;
        for (i, c) in raw.char_indices() {
            if c.is_whitespace() {
                if let Some(s) = chunk_start.take() {
                    Self::split_chunk(&raw[s..i], s, &mut tokens);
                }
            } else if chunk_start.is_none() {
                chunk_start = Some(i);
            }
        }
        if let Some(s) = chunk_start {
            Self::split_chunk(&raw[s..], s, &mut tokens);
        }
        TokenSequence::from_raw_parts(tokens)
    }
}
