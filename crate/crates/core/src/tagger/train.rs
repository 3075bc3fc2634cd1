use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::model::TaggerModel;
use super::optim::{loss_and_grad_weighted, AdamState};
use super::Tagger;
use crate::corpus::{bio_to_spans, spans_to_bio, EntitySpan, Record, TagSequence};
use crate::error::{Error, Result};
use crate::eval::{compute_prf, count_matches, EvalCounts};
use crate::schema::{ClassIndex, LabelSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Sentences per minibatch.
    pub batch_size: usize,
    pub seed: u64,
    pub dev_fraction: f64,
    pub dim: usize,
    pub hasher_seed: u64,
    /// Weight each token's loss by the inverse frequency of its gold class.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.05,
            batch_size: 16,
            seed: 0,
            dev_fraction: 0.1,
            dim: 1 << 18,
            hasher_seed: 0x006e_6572,
            class_weighting: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Entity-level micro F1 on the held-out records, if any.
    pub dev_f1: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
    pub train_records: usize,
    pub dev_records: usize,
}

impl TrainStats {
    pub fn final_dev_f1(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.dev_f1)
    }
}

/// Gold spans as merged-label spans, or an error naming the first label the
/// model cannot represent.
pub fn compressed_gold(r: &Record, schema: &LabelSchema, index: &ClassIndex) -> Result<Vec<EntitySpan>> {
    let gold = r.gold.as_deref().unwrap_or(&[]);
    let tags = schema.compress_tags(&spans_to_bio(gold, r.len())?)?;
    for t in tags.iter() {
        if index.class_of(t).is_none() {
            return Err(Error::SchemaMismatch {
                expected: format!("one of {:?}", index.labels),
                found: t.to_string(),
            });
        }
    }
    Ok(bio_to_spans(&tags))
}

fn class_targets(r: &Record, schema: &LabelSchema, index: &ClassIndex) -> Result<Vec<usize>> {
    let spans = compressed_gold(r, schema, index)?;
    let tags: TagSequence = spans_to_bio(&spans, r.len())?;
    Ok(tags.iter().map(|t| index.class_of(t).expect("checked above")).collect())
}

/// Splits record indices into (train, dev) with a seeded shuffle.
pub fn split_dev(n: usize, dev_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xd3f));
    let n_dev = if n < 2 { 0 } else { ((n as f64 * dev_fraction).round() as usize).min(n - 1) };
    let dev = idx[..n_dev].to_vec();
    let mut train = idx[n_dev..].to_vec();
    train.sort_unstable();
    let mut dev = dev;
    dev.sort_unstable();
    (train, dev)
}

/// Entity-level micro F1 of `model` on `records`, scored in merged labels.
pub fn dev_f1(model: &TaggerModel, records: &[&Record], schema: &LabelSchema) -> Result<f64> {
    let mut counts = EvalCounts::default();
    for r in records {
        let gold = compressed_gold(r, schema, &model.class_index)?;
        let pred = bio_to_spans(&model.tag_scored(&r.tokens).0);
        counts.add(&count_matches(&gold, &pred)?);
    }
    Ok(compute_prf(counts.total).f1)
}

/// Trains a fresh model.
pub fn train(corpus: &[Record], schema: &LabelSchema, cfg: &TrainConfig) -> Result<(TaggerModel, TrainStats)> {
    let model = TaggerModel::zeros(schema.class_index(), cfg.dim, cfg.hasher_seed);
    train_from(model, corpus, schema, cfg)
}

/// Continues training `model` (for example on augmented data). Its feature
/// dimension and hasher seed win over `cfg`; optimizer moments start fresh.
pub fn train_from(
    mut model: TaggerModel,
    corpus: &[Record],
    schema: &LabelSchema,
    cfg: &TrainConfig,
) -> Result<(TaggerModel, TrainStats)> {
    model.check_schema(schema)?;
    let labeled: Vec<&Record> = corpus.iter().filter(|r| r.gold.is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut stats = TrainStats::default();
    if cfg.epochs == 0 {
        return Ok((model, stats));
    }
    let index = model.class_index.clone();
    let k = index.k();
    let (train_idx, dev_idx) = split_dev(labeled.len(), cfg.dev_fraction, cfg.seed);
    stats.train_records = train_idx.len();
    stats.dev_records = dev_idx.len();
    let dev: Vec<&Record> = dev_idx.iter().map(|&i| labeled[i]).collect();

    let hasher = model.hasher();
    let mut sentences: Vec<Vec<(FeatureVector, usize)>> = Vec::with_capacity(train_idx.len());
    for &i in &train_idx {
        let r = labeled[i];
        let ys = class_targets(r, schema, &index)?;
        sentences.push(hasher.extract_all(&r.tokens).into_iter().zip(ys).collect());
    }

    let class_weights = cfg.class_weighting.then(|| {
        let mut freq = vec![0usize; k];
        sentences.iter().flatten().for_each(|(_, y)| freq[*y] += 1);
        let present = freq.iter().filter(|&&c| c > 0).count().max(1);
        let total: usize = freq.iter().sum();
        freq.iter()
            .map(|&c| if c == 0 { 1.0 } else { total as f64 / (present * c) as f64 })
            .collect::<Vec<f64>>()
    });

    let mut adam = AdamState::new(&model, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let n_tokens: usize = sentences.iter().map(Vec::len).sum();
    let bs = cfg.batch_size.max(1);

    for epoch in 1..=cfg.epochs {
        let t0 = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(bs) {
            let batch: Vec<(FeatureVector, usize)> =
                chunk.iter().flat_map(|&i| sentences[i].iter().cloned()).collect();
            if batch.is_empty() {
                continue;
            }
            let (loss, grad) = loss_and_grad_weighted(&model, &batch, class_weights.as_deref());
            adam.step(&mut model, &grad)?;
            epoch_loss += loss * batch.len() as f64;
        }
        let loss = if n_tokens == 0 { 0.0 } else { epoch_loss / n_tokens as f64 };
        let dev_f1 = if dev.is_empty() { None } else { Some(dev_f1(&model, &dev, schema)?) };
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        log::info!(
            "epoch {epoch}: loss {loss:.5} dev F1 {} ({wall_ms:.0} ms)",
            dev_f1.map_or("-".into(), |f| format!("{f:.4}"))
        );
        stats.epochs.push(EpochStats {
            epoch,
            loss,
            dev_f1,
            wall_ms,
        });
    }
    Ok((model, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::from_toml_str(
            "version = \"t\"\nlabels = [\"BANK\", \"CIN\"]\n[rule_bound]\nCIN = \"cin\"\n",
        )
        .unwrap()
    }

    fn rec(id: &str, words: &[&str], gold: Vec<EntitySpan>) -> Record {
        Record::from_words(id, words, Some(gold))
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 15,
            dim: 1 << 12,
            dev_fraction: 0.0,
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    fn corpus() -> Vec<Record> {
        let banks = ["BIDV", "Vietcombank", "Agribank", "VietinBank"];
        banks
            .iter()
            .enumerate()
            .map(|(i, b)| rec(&format!("r{i}"), &["gửi", "qua", b, "nhé"], vec![EntitySpan::new(2, 3, "BANK")]))
            .collect()
    }

    #[test]
    fn learns_tiny_corpus() {
        let (m, stats) = train(&corpus(), &schema(), &small_cfg()).unwrap();
        assert_eq!(stats.epochs.len(), 15);
        assert!(stats.epochs.last().unwrap().loss < stats.epochs[0].loss);
        for r in corpus() {
            assert_eq!(bio_to_spans(&m.tag_scored(&r.tokens).0), r.gold.unwrap());
        }
    }

    #[test]
    fn zero_epochs_gives_zero_model() {
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let (m, stats) = train(&corpus(), &schema(), &cfg).unwrap();
        assert_eq!(m, TaggerModel::zeros(schema().class_index(), cfg.dim, cfg.hasher_seed));
        assert!(stats.epochs.is_empty());
    }

    #[test]
    fn errors() {
        let unlabeled = vec![Record::from_text("x", "a b")];
        assert!(matches!(train(&unlabeled, &schema(), &small_cfg()), Err(Error::EmptyCorpus)));
        let cin = vec![rec("c", &["số", "001085123456"], vec![EntitySpan::new(1, 2, "CIN")])];
        assert!(matches!(
            train(&cin, &schema(), &small_cfg()),
            Err(Error::SchemaMismatch { .. })
        ));
        let other = schema().without_rule_bindings();
        let m = TaggerModel::zeros(schema().class_index(), 16, 0);
        assert!(matches!(
            train_from(m, &corpus(), &other, &small_cfg()),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_and_weighted() {
        let a = train(&corpus(), &schema(), &small_cfg()).unwrap().0;
        let b = train(&corpus(), &schema(), &small_cfg()).unwrap().0;
        assert_eq!(a, b);
        let cfg = TrainConfig { class_weighting: true, ..small_cfg() };
        let w = train(&corpus(), &schema(), &cfg).unwrap().0;
        assert_ne!(a, w);
    }

    #[test]
    fn dev_split_is_seeded() {
        let (t, d) = split_dev(10, 0.2, 3);
        assert_eq!((t.len(), d.len()), (8, 2));
        assert_eq!(split_dev(10, 0.2, 3), (t, d));
        assert_eq!(split_dev(1, 0.5, 0), (vec![0], vec![]));
    }
}
