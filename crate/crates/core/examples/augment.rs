//! Synonym replacement and entity recombination; gold spans follow the
//! rewritten tokens.

use hybrid_ner::augment::{augment_synonyms, recombine_entities, AugmentConfig, SynonymLexicon};
use hybrid_ner::synth::measurement_corpus;

fn main() -> hybrid_ner::Result<()> {
    let mut lex = SynonymLexicon::default();
    lex.insert("khách", "khách hàng")?;
    lex.insert("đặt", "order")?;
    lex.insert("áo", "áo sơ mi")?;
    let records = measurement_corpus(2, 5, true);
    let cfg = AugmentConfig { p: 0.5, seed: 1, variants: 2, recombine_pairs: 1 };

    let show = |tag: &str, r: &hybrid_ner::corpus::Record| {
        let spans: Vec<String> = r.gold.iter().flatten().map(|s| format!("{}={}", s.label, r.tokens.surface(s.start, s.end))).collect();
        println!("{tag:<6} {}\n       {}", r.raw, spans.join("  "));
    };
    records.iter().for_each(|r| show("orig", r));
    augment_synonyms(&records, &lex, &cfg).iter().for_each(|r| show("syn", r));
    recombine_entities(&records, &cfg).iter().for_each(|r| show("recomb", r));
    Ok(())
}
