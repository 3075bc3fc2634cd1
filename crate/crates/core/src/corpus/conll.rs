use super::{bio_to_spans, spans_to_bio, EntitySpan, Record, Tag, TagSequence};
use crate::error::{Error, Result};

const ID_PREFIX: &str = "# id = ";

fn default_id(index: usize) -> String {
    format!("s{}", index + 1)
}

/// Reads `token<TAB>tag` lines with blank lines between sentences.
///
/// Extra columns are allowed; the tag is taken from the last one. A
/// `# id = X` line before a sentence sets its id, otherwise sentences are
/// numbered `s1`, `s2`, ...
pub fn read_conll(text: &str) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    let mut pending_id: Option<String> = None;

    let mut flush = |words: &mut Vec<String>, tags: &mut Vec<Tag>, id: &mut Option<String>| {
        if words.is_empty() {
            return;
        }
        let id = id.take().unwrap_or_else(|| default_id(records.len()));
        let gold = bio_to_spans(&TagSequence(std::mem::take(tags)));
        records.push(Record::from_words(id, words, Some(gold)));
        words.clear();
    };

    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut words, &mut tags, &mut pending_id);
            continue;
        }
        if let Some(id) = line.strip_prefix(ID_PREFIX) {
            if words.is_empty() {
                pending_id = Some(id.trim().to_string());
                continue;
            }
        }
        let malformed = || Error::MalformedLine {
            line: i + 1,
            content: line.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols[0].is_empty() {
            return Err(malformed());
        }
        let tag: Tag = cols[cols.len() - 1].trim().parse().map_err(|_| malformed())?;
        words.push(cols[0].to_string());
        tags.push(tag);
    }
    flush(&mut words, &mut tags, &mut pending_id);
    Ok(records)
}

/// Which span set of a record to serialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanSet {
    Gold,
    Predicted,
}

/// Writes gold spans as CoNLL.
pub fn write_conll(records: &[Record]) -> Result<String> {
    write_conll_with(records, SpanSet::Gold)
}

/// Writes the chosen span set; a record lacking it is written as all-O.
pub fn write_conll_with(records: &[Record], which: SpanSet) -> Result<String> {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if r.id != default_id(i) {
            out.push_str(ID_PREFIX);
            out.push_str(&r.id);
            out.push('\n');
        }
        let spans: &[EntitySpan] = match which {
            SpanSet::Gold => r.gold.as_deref(),
            SpanSet::Predicted => r.predicted.as_deref(),
        }
        .unwrap_or(&[]);
        let tags = spans_to_bio(spans, r.tokens.len())?;
        for (tok, tag) in r.tokens.iter().zip(tags.iter()) {
            out.push_str(&tok.text);
            out.push('\t');
            out.push_str(&tag.to_string());
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}
