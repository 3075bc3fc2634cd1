#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_ner::corpus::{EntitySpan, TokenSequence};
use hybrid_ner::schema::ClassIndex;
use hybrid_ner::tagger::{loss_and_grad, FeatureVector, TaggerModel};

pub fn span(start: usize, end: usize, label: &str) -> EntitySpan {
    EntitySpan::new(start, end, label)
}

pub fn keys(spans: &[EntitySpan]) -> Vec<(usize, usize, String)> {
    spans.iter().map(|s| (s.start, s.end, s.label.clone())).collect()
}

pub fn toks(words: &[&str]) -> TokenSequence {
    TokenSequence::from_words(words).1
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Fixture files copied to a fresh directory, without any trained model.
pub fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for e in std::fs::read_dir(fixtures_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.file_name().unwrap() != "model.bin" {
            std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    dir
}

/// Non-overlapping random spans over `n` tokens drawn from `labels`.
pub fn random_spans(rng: &mut impl Rng, n: usize, max_spans: usize, labels: &[&str]) -> Vec<EntitySpan> {
    let mut out = Vec::new();
    let mut pos = 0;
    while out.len() < max_spans && pos < n {
        pos += rng.gen_range(0..3);
        if pos >= n {
            break;
        }
        let len = rng.gen_range(1..=3.min(n - pos));
        out.push(span(pos, pos + len, labels[rng.gen_range(0..labels.len())]));
        pos += len;
    }
    out
}

/// Naive per-label matcher: a prediction is a true positive when some gold
/// span has identical start, end and label.
pub fn brute_force_counts(gold: &[EntitySpan], pred: &[EntitySpan]) -> BTreeMap<String, (usize, usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for p in pred {
        let hit = gold.iter().any(|g| g.start == p.start && g.end == p.end && g.label == p.label);
        let e = out.entry(p.label.clone()).or_default();
        if hit {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    for g in gold {
        let hit = pred.iter().any(|p| g.start == p.start && g.end == p.end && g.label == p.label);
        if !hit {
            out.entry(g.label.clone()).or_default().2 += 1;
        }
    }
    out
}

/// Precision, recall and F1 written out directly, 0 on empty denominators.
pub fn prf_closed_form(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Each CIN constraint checked on its own.
pub fn cin_oracle(s: &str, provinces: &[&str], reference: NaiveDate, ages: (i32, i32)) -> bool {
    let length_ok = s.len() == 12;
    let digits_ok = s.chars().all(|c| c.is_ascii_digit());
    if !(length_ok && digits_ok) {
        return false;
    }
    let province_ok = provinces.contains(&&s[..3]);
    let d4 = s.as_bytes()[3] - b'0';
    let d4_ok = d4 <= 3;
    let yy: i32 = s[4..6].parse().unwrap();
    let under_20_ok = !(d4 == 2 || d4 == 3) || yy < 20;
    let year = if d4 <= 1 { 1900 + yy } else { 2000 + yy };
    let age = reference.year() - year;
    let age_ok = ages.0 <= age && age <= ages.1;
    province_ok && d4_ok && under_20_ok && age_ok
}

/// Tail rule checked on its own: 9 digits not starting with 0, or 10 digits
/// starting with 0 or 1.
pub fn order_tail_oracle(tail: &str) -> bool {
    let all_digits = !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit());
    let first = tail.chars().next();
    all_digits
        && match tail.len() {
            9 => first != Some('0'),
            10 => matches!(first, Some('0') | Some('1')),
            _ => false,
        }
}

fn independent_loss(m: &TaggerModel, batch: &[(FeatureVector, usize)]) -> f64 {
    let mut total = 0.0;
    for (fv, y) in batch {
        let s: Vec<f64> = (0..m.k()).map(|c| fv.iter().map(|(f, v)| v * m.weight(c, f)).sum()).collect();
        let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + s.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
        total += lse - s[*y];
    }
    total / batch.len() as f64
}

/// Largest relative error between the analytic gradient and central
/// differences of an independently written loss, over `draws` coordinates.
pub fn gradient_check(draws: usize, seed: u64, h: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ci = ClassIndex::new(vec!["A".into(), "B".into(), "C".into()], "grad".into());
    let dim = 48;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < draws {
        let mut m = TaggerModel::zeros(ci.clone(), dim, 0);
        for c in 0..m.k() {
            for f in 0..dim {
                m.set_weight(c, f, rng.gen_range(-1.0..1.0));
            }
        }
        let batch: Vec<(FeatureVector, usize)> = (0..6)
            .map(|_| {
                let fv = FeatureVector::new((0..5).map(|_| (rng.gen_range(0..dim as u32), rng.gen_range(-1.0..1.0))).collect());
                (fv, rng.gen_range(0..m.k()))
            })
            .collect();
        let (_, grad) = loss_and_grad(&m, &batch);
        for _ in 0..10 {
            let (fv, _) = &batch[rng.gen_range(0..batch.len())];
            let (f, _) = fv.iter().nth(rng.gen_range(0..fv.len())).unwrap();
            let c = rng.gen_range(0..m.k());
            let w = m.weight(c, f);
            m.set_weight(c, f, w + h);
            let lp = independent_loss(&m, &batch);
            m.set_weight(c, f, w - h);
            let lm = independent_loss(&m, &batch);
            m.set_weight(c, f, w);
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad.get(c, f);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
            done += 1;
        }
    }
    worst
}

/// Rule-favorable pipeline with a briefly trained tagger.
pub fn small_pipeline() -> hybrid_ner::pipeline::Pipeline {
    use hybrid_ner::synth::{rule_favorable_corpus, rule_favorable_rules, rule_favorable_schema};
    let schema = rule_favorable_schema();
    let cfg = hybrid_ner::tagger::TrainConfig { epochs: 3, dim: 1 << 16, seed: 2, ..Default::default() };
    let (m, _) = hybrid_ner::pipeline::run_training(&rule_favorable_corpus(300, 4), &schema, &cfg, None).unwrap();
    hybrid_ner::pipeline::Pipeline::new(
        schema,
        rule_favorable_rules(),
        std::sync::Arc::new(m),
        hybrid_ner::postprocess::Gazetteer::default(),
        hybrid_ner::postprocess::PostConfig::default(),
    )
    .unwrap()
}

/// Spans as served, computed offline.
pub fn offline_views(p: &hybrid_ner::pipeline::Pipeline, text: &str) -> Vec<hybrid_ner::pipeline::SpanView> {
    let r = hybrid_ner::corpus::Record::from_text("x", text);
    let out = p.infer(&r).unwrap();
    out.spans.iter().map(|s| hybrid_ner::pipeline::SpanView::new(s, &r.tokens, &r.raw)).collect()
}
