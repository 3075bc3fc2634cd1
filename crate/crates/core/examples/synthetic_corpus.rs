//! Writes the bundled demo corpus (orders plus garment measurements) as
//! CoNLL. `cargo run --example synthetic_corpus -- fixtures/synthetic.conll`

use hybrid_ner::corpus::write_conll;
use hybrid_ner::synth::{measurement_corpus, rule_favorable_corpus};

fn main() -> hybrid_ner::Result<()> {
    let mut records = rule_favorable_corpus(300, 11);
    records.extend(measurement_corpus(150, 12, true));
    let text = write_conll(&records)?;
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
