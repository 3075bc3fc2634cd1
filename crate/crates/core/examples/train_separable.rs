//! Trains the tagger on the synthetic separable corpus and prints the
//! per-epoch dev F1.

use std::time::Instant;

use hybrid_ner::synth::{separable_corpus, separable_schema};
use hybrid_ner::tagger::{train, TrainConfig};

fn main() -> hybrid_ner::Result<()> {
    let corpus = separable_corpus(2000, 42);
    let schema = separable_schema();
    let cfg = TrainConfig {
        epochs: 20,
        seed: 42,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let (_model, stats) = train(&corpus, &schema, &cfg)?;
    for e in &stats.epochs {
        println!("epoch {:>2}  loss {:.4}  dev F1 {:.4}", e.epoch, e.loss, e.dev_f1.unwrap_or(0.0));
    }
    println!("{} train / {} dev records in {:.1?}", stats.train_records, stats.dev_records, t.elapsed());
    Ok(())
}
