//! Entity-preserving augmentation: synonym replacement, entity
//! recombination and a back-translation adapter contract.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::LineChannel;
use crate::corpus::{DefaultTokenizer, EntitySpan, Record, Token, TokenSequence, Tokenizer};
use crate::error::{Error, Result};

/// Lowercase word → replacement word sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl SynonymLexicon {
    pub fn insert(&mut self, key: &str, replacement: &str) -> Result<()> {
        let key = key.trim().to_lowercase();
        let words: Vec<String> = replacement.split_whitespace().map(str::to_string).collect();
        if key.is_empty() || words.is_empty() {
            return Err(Error::Config(format!("empty lexicon entry {key:?} → {replacement:?}")));
        }
        if words.len() == 1 && words[0].to_lowercase() == key {
            return Err(Error::Config(format!("lexicon maps {key:?} to itself")));
        }
        let e = self.entries.entry(key).or_default();
        if !e.contains(&words) {
            e.push(words);
        }
        Ok(())
    }

    /// Parses `word<TAB>replacement[,replacement…]` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = || Error::MalformedLine {
                line: i + 1,
                content: line.to_string(),
            };
            let (k, reps) = line.split_once('\t').ok_or_else(malformed)?;
            for r in reps.split(',') {
                lex.insert(k, r).map_err(|_| malformed())?;
            }
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Per-token replacement probability.
    pub p: f64,
    pub seed: u64,
    /// Synonym variants produced per record.
    pub variants: usize,
    /// Recombination partners tried per record.
    pub recombine_pairs: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p: 0.15,
            seed: 0,
            variants: 2,
            recombine_pairs: 1,
        }
    }
}

/// Accumulates raw text and token offsets.
#[derive(Default)]
struct Builder {
    raw: String,
    tokens: Vec<Token>,
}

impl Builder {
    fn gap(&mut self, s: &str) {
        self.raw.push_str(s);
    }

    fn token(&mut self, s: &str) {
        let start = self.raw.len();
        self.raw.push_str(s);
        self.tokens.push(Token {
            text: s.to_string(),
            start,
            end: self.raw.len(),
        });
    }

    fn finish(self) -> (String, TokenSequence) {
        let toks = TokenSequence::new(&self.raw, self.tokens).expect("builder keeps offsets consistent");
        (self.raw, toks)
    }
}

/// Text between token `i - 1` and token `i` (leading text for `i = 0`,
/// trailing text for `i = n`).
fn gap_before(r: &Record, i: usize) -> &str {
    let from = if i == 0 { 0 } else { r.tokens[i - 1].end };
    let to = if i == r.tokens.len() { r.raw.len() } else { r.tokens[i].start };
    &r.raw[from..to]
}

fn entity_mask(r: &Record) -> Vec<bool> {
    let mut m = vec![false; r.len()];
    for s in r.gold.iter().flatten() {
        m[s.start..s.end].iter_mut().for_each(|x| *x = true);
    }
    m
}

/// One variant of `record` where each non-entity token with a lexicon entry
/// is replaced with probability `p`. Gaps between tokens are kept.
pub fn synonym_replace(record: &Record, lexicon: &SynonymLexicon, p: f64, rng: &mut impl Rng) -> Record {
    let mask = entity_mask(record);
    let mut b = Builder::default();
    let mut new_start = Vec::with_capacity(record.len() + 1);
    for (i, t) in record.tokens.iter().enumerate() {
        b.gap(gap_before(record, i));
        new_start.push(b.tokens.len());
        let choice = match lexicon.get(&t.text) {
            Some(opts) if !mask[i] && rng.gen_bool(p) => opts.choose(rng),
            _ => None,
        };
        match choice {
            Some(words) => {
                for (k, w) in words.iter().enumerate() {
                    if k > 0 {
                        b.gap(" ");
                    }
                    b.token(w);
                }
            }
            None => b.token(&t.text),
        }
    }
    b.gap(gap_before(record, record.len()));
    new_start.push(b.tokens.len());
    let (raw, tokens) = b.finish();
    let remap = |s: &EntitySpan| {
        let mut s = s.clone();
        // entity tokens are never replaced, so the span keeps its length
        let len = s.len();
        s.start = new_start[s.start];
        s.end = s.start + len;
        s
    };
    Record {
        id: record.id.clone(),
        raw,
        tokens,
        gold: record.gold.as_ref().map(|g| g.iter().map(remap).collect()),
        predicted: None,
    }
}

/// `cfg.variants` synonym variants per record, ids suffixed `#synN`.
pub fn augment_synonyms(records: &[Record], lexicon: &SynonymLexicon, cfg: &AugmentConfig) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for r in records {
        for v in 0..cfg.variants {
            let mut x = synonym_replace(r, lexicon, cfg.p, &mut rng);
            x.id = format!("{}#syn{}", r.id, v + 1);
            out.push(x);
        }
    }
    out
}

/// `target` with its entity `span_idx` replaced by entity `donor_idx` of
/// `donor` (surface text and inner spacing copied verbatim).
fn swap_in(target: &Record, span_idx: usize, donor: &Record, donor_idx: usize) -> Record {
    let gold = target.gold.as_ref().expect("recombined records have gold");
    let s = &gold[span_idx];
    let d = &donor.gold.as_ref().expect("donor has gold")[donor_idx];
    let mut b = Builder::default();
    for i in 0..s.start {
        b.gap(gap_before(target, i));
        b.token(&target.tokens[i].text);
    }
    b.gap(gap_before(target, s.start));
    for j in d.start..d.end {
        if j > d.start {
            b.gap(gap_before(donor, j));
        }
        b.token(&donor.tokens[j].text);
    }
    for i in s.end..target.len() {
        b.gap(gap_before(target, i));
        b.token(&target.tokens[i].text);
    }
    b.gap(gap_before(target, target.len()));
    let (raw, tokens) = b.finish();
    let delta = d.len() as isize - s.len() as isize;
    let new_gold = gold
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let mut g = g.clone();
            if k == span_idx {
                g.end = g.start + d.len();
            } else if g.start >= s.end {
                g.start = (g.start as isize + delta) as usize;
                g.end = (g.end as isize + delta) as usize;
            }
            g
        })
        .collect();
    Record {
        id: target.id.clone(),
        raw,
        tokens,
        gold: Some(new_gold),
        predicted: None,
    }
}

/// Swaps same-label entity surfaces between sampled record pairs. Each swap
/// yields two records, so per-label entity counts are conserved. Returns
/// nothing (with a warning) if no two records share a label.
pub fn recombine_entities(records: &[Record], cfg: &AugmentConfig) -> Vec<Record> {
    let labels_of = |r: &Record| -> BTreeSet<String> { r.gold.iter().flatten().map(|s| s.label.clone()).collect() };
    let label_sets: Vec<BTreeSet<String>> = records.iter().map(labels_of).collect();
    let mut holders: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ls) in label_sets.iter().enumerate() {
        for l in ls {
            holders.entry(l).or_default().push(i);
        }
    }
    if !holders.values().any(|h| h.len() >= 2) {
        if !records.is_empty() {
            log::warn!("recombination skipped: no two records share an entity label");
        }
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7265_636f);
    let mut out = Vec::new();
    let mut n = 0usize;
    for (i, r) in records.iter().enumerate() {
        for _ in 0..cfg.recombine_pairs {
            let shared: Vec<&String> = label_sets[i].iter().filter(|l| holders[l.as_str()].len() >= 2).collect();
            let Some(&label) = shared.choose(&mut rng) else { break };
            let partners: Vec<usize> = holders[label.as_str()].iter().copied().filter(|&j| j != i).collect();
            let j = *partners.choose(&mut rng).expect("at least two holders");
            let pick = |rec: &Record, rng: &mut ChaCha8Rng| {
                let idx: Vec<usize> = rec.gold.iter().flatten().enumerate().filter(|(_, s)| &s.label == label).map(|(k, _)| k).collect();
                *idx.choose(rng).expect("holder has the label")
            };
            let (a, b) = (pick(r, &mut rng), pick(&records[j], &mut rng));
            let surf = |rec: &Record, k: usize| {
                let s = &rec.gold.as_ref().unwrap()[k];
                rec.tokens.texts()[s.start..s.end].join(" ")
            };
            if surf(r, a) == surf(&records[j], b) {
                continue;
            }
            n += 1;
            let mut x = swap_in(r, a, &records[j], b);
            x.id = format!("{}#rec{n}a", r.id);
            let mut y = swap_in(&records[j], b, r, a);
            y.id = format!("{}#rec{n}b", records[j].id);
            out.push(x);
            out.push(y);
        }
    }
    out
}

/// Something that rewrites a text while keeping `protected` strings verbatim.
pub trait Translator {
    fn translate(&self, id: &str, text: &str, protected: &[String]) -> Result<String>;
}

/// Back-translation over a line channel: request `{"id", "text",
/// "protected_spans"}`, response `{"id", "text"}`.
pub struct LineTranslator {
    pub channel: LineChannel,
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    record: &'a str,
    text: &'a str,
    protected_spans: &'a [String],
}

#[derive(Deserialize)]
struct TranslateResponse {
    text: String,
}

impl Translator for LineTranslator {
    fn translate(&self, id: &str, text: &str, protected: &[String]) -> Result<String> {
        let resp: TranslateResponse = self.channel.call(&TranslateRequest {
            record: id,
            text,
            protected_spans: protected,
        })?;
        Ok(resp.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BacktranslateReport {
    pub records: Vec<Record>,
    /// Ids of records dropped because an entity could not be relocated.
    pub lost: Vec<String>,
}

/// Relocates each gold entity, in order, in the translated text. Fails with
/// `EntityLost` if one is missing.
pub fn relocate(record: &Record, new_text: &str, tokenizer: &dyn Tokenizer) -> Result<Record> {
    let tokens = tokenizer.tokenize(new_text);
    let words = tokens.texts();
    let mut from = 0;
    let mut gold = Vec::new();
    for s in record.gold.iter().flatten() {
        let want = &record.tokens.texts()[s.start..s.end];
        let at = (from..words.len())
            .find(|&i| words[i..].starts_with(want))
            .ok_or_else(|| Error::EntityLost(record.id.clone()))?;
        let mut g = s.clone();
        g.start = at;
        g.end = at + want.len();
        from = g.end;
        gold.push(g);
    }
    Ok(Record {
        id: record.id.clone(),
        raw: new_text.to_string(),
        tokens,
        gold: record.gold.as_ref().map(|_| gold),
        predicted: None,
    })
}

/// Back-translates every record. Adapter failures abort; records whose
/// entities do not survive are reported and skipped.
pub fn backtranslate(records: &[Record], translator: &dyn Translator) -> Result<BacktranslateReport> {
    let mut rep = BacktranslateReport::default();
    for r in records {
        let protected: Vec<String> = r
            .gold
            .iter()
            .flatten()
            .map(|s| r.raw[r.tokens[s.start].start..r.tokens[s.end - 1].end].to_string())
            .collect();
        let text = translator.translate(&r.id, &r.raw, &protected)?;
        match relocate(r, &text, &DefaultTokenizer) {
            Ok(mut x) => {
                x.id = format!("{}#bt", r.id);
                rep.records.push(x);
            }
            Err(Error::EntityLost(id)) => {
                log::warn!("back-translation lost an entity of record {id}");
                rep.lost.push(id);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}
