use serde::{Deserialize, Serialize};

use super::{DefaultTokenizer, EntitySpan, Record, Source, TokenSequence, Tokenizer};
use crate::error::{Error, Result};

/// One line of the JSONL record format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<JsonEntity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Vec<JsonEntity>>,
}

/// A character-offset entity. Offsets are UTF-8 byte offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonEntity {
    pub start_char: usize,
    pub end_char: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl JsonEntity {
    pub fn from_span(span: &EntitySpan, tokens: &TokenSequence, with_provenance: bool) -> Self {
        Self {
            start_char: tokens[span.start].start,
            end_char: tokens[span.end - 1].end,
            label: span.label.clone(),
            source: with_provenance.then_some(span.source),
            confidence: with_provenance.then_some(span.confidence),
        }
    }

    fn to_span(&self, record_id: &str, tokens: &TokenSequence) -> Result<EntitySpan> {
        let misaligned = || Error::MisalignedEntity {
            record_id: record_id.to_string(),
            start: self.start_char,
            end: self.end_char,
        };
        let start = tokens.token_starting_at(self.start_char).ok_or_else(misaligned)?;
        let last = tokens.token_ending_at(self.end_char).ok_or_else(misaligned)?;
        if last < start {
            return Err(misaligned());
        }
        let mut span = EntitySpan::new(start, last + 1, self.label.clone());
        if let Some(s) = self.source {
            span.source = s;
        }
        if let Some(c) = self.confidence {
            span.confidence = c;
        }
        Ok(span)
    }
}

impl JsonRecord {
    pub fn from_record(r: &Record) -> Self {
        let conv = |spans: &Vec<EntitySpan>, prov: bool| {
            spans
                .iter()
                .map(|s| JsonEntity::from_span(s, &r.tokens, prov))
                .collect()
        };
        Self {
            id: r.id.clone(),
            text: r.raw.clone(),
            entities: r.gold.as_ref().map(|g| conv(g, false)),
            predicted: r.predicted.as_ref().map(|p| conv(p, true)),
        }
    }

    pub fn into_record(self, tokenizer: &dyn Tokenizer) -> Result<Record> {
        let tokens = tokenizer.tokenize(&self.text);
        let convert = |ents: Option<Vec<JsonEntity>>| -> Result<Option<Vec<EntitySpan>>> {
            ents.map(|es| es.iter().map(|e| e.to_span(&self.id, &tokens)).collect())
                .transpose()
        };
        let gold = convert(self.entities.clone())?;
        let predicted = convert(self.predicted.clone())?;
        let r = Record {
            id: self.id,
            raw: self.text,
            tokens,
            gold,
            predicted,
        };
        r.validate()?;
        Ok(r)
    }
}

/// Reads JSONL records, tokenizing with the default tokenizer.
pub fn read_jsonl(text: &str) -> Result<Vec<Record>> {
    read_jsonl_with(text, &DefaultTokenizer)
}

pub fn read_jsonl_with(text: &str, tokenizer: &dyn Tokenizer) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let jr: JsonRecord = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            content: format!("{e}: {line}"),
        })?;
        out.push(jr.into_record(tokenizer)?);
    }
    Ok(out)
}

pub fn write_jsonl(records: &[Record]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&JsonRecord::from_record(r))?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_token_entity() {
        let line = r#"{"id":"a","text":"qua BIDV nhé","entities":[{"start_char":4,"end_char":8,"label":"BANK"}]}"#;
        let recs = read_jsonl(line).unwrap();
        let g = recs[0].gold.as_ref().unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].key(), (1, 2, "BANK"));
    }

    #[test]
    fn mid_token_end_is_misaligned() {
        let line = r#"{"id":"a","text":"Vietcombank","entities":[{"start_char":0,"end_char":7,"label":"BANK"}]}"#;
        match read_jsonl(line) {
            Err(Error::MisalignedEntity { record_id, start, end }) => {
                assert_eq!((record_id.as_str(), start, end), ("a", 0, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_json_reports_line() {
        let r = read_jsonl("\n{not json}\n");
        assert!(matches!(r, Err(Error::MalformedLine { line: 2, .. })));
    }

    #[test]
    fn round_trip_with_predictions() {
        let mut r = Record::from_text("x", "Khách hàng đặt qua BIDV hoặc Vietcombank.");
        r.gold = Some(vec![EntitySpan::new(4, 5, "BANK"), EntitySpan::new(6, 7, "BANK")]);
        r.predicted = Some(vec![EntitySpan::new(4, 5, "BANK")
            .with_source(Source::Post)
            .with_confidence(0.5)]);
        let text = write_jsonl(&[r.clone()]).unwrap();
        assert_eq!(read_jsonl(&text).unwrap(), vec![r]);
    }

    #[test]
    fn unlabeled_input_has_no_gold() {
        let recs = read_jsonl(r#"{"id":"u","text":"xin chào"}"#).unwrap();
        assert!(recs[0].gold.is_none());
        assert_eq!(recs[0].tokens.len(), 2);
    }
}
