//! Entity-level scoring under exact boundary and type match.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{check_non_overlapping, EntitySpan, Record};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Per-label counts plus their sum.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub per_label: BTreeMap<String, Counts>,
    pub total: Counts,
}

impl EvalCounts {
    pub fn add(&mut self, other: &EvalCounts) {
        for (l, c) in &other.per_label {
            *self.per_label.entry(l.clone()).or_default() += *c;
        }
        self.total += other.total;
    }
}

/// Exact-match counts. Both sets must be internally non-overlapping.
pub fn count_matches(gold: &[EntitySpan], pred: &[EntitySpan]) -> Result<EvalCounts> {
    check_non_overlapping(gold)?;
    check_non_overlapping(pred)?;
    let gold_keys: HashSet<(usize, usize, &str)> = gold.iter().map(EntitySpan::key).collect();
    let mut out = EvalCounts::default();
    for g in gold {
        out.per_label.entry(g.label.clone()).or_default().fn_ += 1;
    }
    for p in pred {
        let c = out.per_label.entry(p.label.clone()).or_default();
        if gold_keys.contains(&p.key()) {
            c.tp += 1;
            c.fn_ -= 1;
        } else {
            c.fp += 1;
        }
    }
    for c in out.per_label.values() {
        out.total += *c;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1; a zero denominator gives 0.
pub fn compute_prf(c: Counts) -> Prf {
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let (tp, fp, fn_) = (c.tp as f64, c.fp as f64, c.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Prf {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

/// Outcome of aligning predictions against gold spans.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub exact: usize,
    pub boundary_error: usize,
    pub type_error: usize,
    pub boundary_and_type: usize,
    pub missing: usize,
    pub spurious: usize,
}

impl Taxonomy {
    pub fn errors(&self) -> usize {
        self.boundary_error + self.type_error + self.boundary_and_type + self.missing + self.spurious
    }

    /// Share of errors where the right mention was found with wrong
    /// boundaries (same or different label).
    pub fn partial_share(&self) -> f64 {
        share(self.boundary_error + self.boundary_and_type, self.errors())
    }

    pub fn missing_share(&self) -> f64 {
        share(self.missing, self.errors())
    }

    pub fn add(&mut self, o: &Taxonomy) {
        self.exact += o.exact;
        self.boundary_error += o.boundary_error;
        self.type_error += o.type_error;
        self.boundary_and_type += o.boundary_and_type;
        self.missing += o.missing;
        self.spurious += o.spurious;
    }
}

fn share(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn overlap(a: &EntitySpan, b: &EntitySpan) -> usize {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

/// Greedy one-to-one alignment: pairs taken by largest token overlap,
/// ties to the leftmost gold span, then the leftmost prediction.
pub fn align(gold: &[EntitySpan], pred: &[EntitySpan]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let o = overlap(g, p);
            if o > 0 {
                pairs.push((o, gi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(gold[a.1].start.cmp(&gold[b.1].start))
            .then(pred[a.2].start.cmp(&pred[b.2].start))
    });
    let (mut gu, mut pu) = (vec![false; gold.len()], vec![false; pred.len()]);
    let mut out = Vec::new();
    for (_, gi, pi) in pairs {
        if !gu[gi] && !pu[pi] {
            gu[gi] = true;
            pu[pi] = true;
            out.push((gi, pi));
        }
    }
    out.sort();
    out
}

pub fn classify_errors(gold: &[EntitySpan], pred: &[EntitySpan]) -> Taxonomy {
    let mut t = Taxonomy::default();
    let pairs = align(gold, pred);
    for &(gi, pi) in &pairs {
        let (g, p) = (&gold[gi], &pred[pi]);
        let same_bounds = g.start == p.start && g.end == p.end;
        match (same_bounds, g.label == p.label) {
            (true, true) => t.exact += 1,
            (false, true) => t.boundary_error += 1,
            (true, false) => t.type_error += 1,
            (false, false) => t.boundary_and_type += 1,
        }
    }
    t.missing = gold.len() - pairs.len();
    t.spurious = pred.len() - pairs.len();
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: EvalCounts,
    pub per_label: BTreeMap<String, Prf>,
    pub micro: Prf,
    pub taxonomy: Taxonomy,
    pub records: usize,
}

impl EvalReport {
    pub fn from_parts(counts: EvalCounts, taxonomy: Taxonomy, records: usize) -> Self {
        Self {
            per_label: counts
                .per_label
                .iter()
                .map(|(l, c)| (l.clone(), compute_prf(*c)))
                .collect(),
            micro: compute_prf(counts.total),
            counts,
            taxonomy,
            records,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
            "label", "tp", "fp", "fn", "precision", "recall", "f1"
        )?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, c: &Counts, m: &Prf| {
            writeln!(
                f,
                "{:<24} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                name, c.tp, c.fp, c.fn_, m.precision, m.recall, m.f1
            )
        };
        for (l, c) in &self.counts.per_label {
            row(f, l, c, &self.per_label[l])?;
        }
        row(f, "micro", &self.counts.total, &self.micro)?;
        let t = &self.taxonomy;
        writeln!(f)?;
        writeln!(f, "errors             {}", t.errors())?;
        writeln!(f, "  boundary         {}", t.boundary_error)?;
        writeln!(f, "  type             {}", t.type_error)?;
        writeln!(f, "  boundary+type    {}", t.boundary_and_type)?;
        writeln!(f, "  missing          {}", t.missing)?;
        writeln!(f, "  spurious         {}", t.spurious)?;
        writeln!(
            f,
            "partial {:.1}%  missing {:.1}%",
            100.0 * t.partial_share(),
            100.0 * t.missing_share()
        )
    }
}

/// Micro-averaged report over records carrying both gold and predictions.
/// A record without predictions counts as predicting nothing.
pub fn evaluate_corpus(records: &[Record]) -> Result<EvalReport> {
    let mut counts = EvalCounts::default();
    let mut tax = Taxonomy::default();
    for r in records {
        let gold = r.gold.as_deref().ok_or_else(|| Error::MissingGold(r.id.clone()))?;
        let pred = r.predicted.as_deref().unwrap_or(&[]);
        counts.add(&count_matches(gold, pred)?);
        tax.add(&classify_errors(gold, pred));
    }
    Ok(EvalReport::from_parts(counts, tax, records.len()))
}

/// Copies predictions onto gold records by id. Gold records with no
/// prediction get an empty one; token counts must agree.
pub fn attach_predictions(gold: Vec<Record>, predicted: Vec<Record>) -> Result<Vec<Record>> {
    let mut by_id: HashMap<String, Record> = HashMap::new();
    for p in predicted {
        by_id.insert(p.id.clone(), p);
    }
    gold.into_iter()
        .map(|mut g| {
            let pred = match by_id.remove(&g.id) {
                None => Vec::new(),
                Some(p) => {
                    if p.tokens.len() != g.tokens.len() {
                        return Err(Error::Config(format!(
                            "record {}: gold has {} tokens, prediction has {}",
                            g.id,
                            g.tokens.len(),
                            p.tokens.len()
                        )));
                    }
                    p.predicted.or(p.gold).unwrap_or_default()
                }
            };
            g.predicted = Some(pred);
            Ok(g)
        })
        .collect()
}
