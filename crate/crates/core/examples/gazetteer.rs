//! Gazetteer lookup and the post-processing it drives: a bank missed by the
//! tagger is added, a truncated name is extended.

use std::path::Path;

use hybrid_ner::corpus::{EntitySpan, Record, Source};
use hybrid_ner::postprocess::{postprocess_all, Gazetteer, PostConfig};
use hybrid_ner::schema::load_schema;

fn main() -> hybrid_ner::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let gaz = Gazetteer::load(fixtures.join("gazetteer.tsv"), false)?;
    let schema = load_schema(fixtures.join("schema.toml"))?;

    let r = Record::from_text("g", "Thủ tướng Pham Minh Chinh đến Ngân hàng Ngoại thương (Vietcombank) sáng nay");
    for h in gaz.find_all(&r.tokens) {
        println!("hit {:>8}  {}", h.label, r.tokens.surface(h.start, h.end));
    }
    // the tagger only found the surname
    let model = [EntitySpan::new(2, 3, "PERSON").with_source(Source::Model)];
    for s in postprocess_all(&model, &r.tokens, &schema, &gaz, &PostConfig::default()) {
        println!("out {:>8}  {:<16} {:?}", s.label, r.tokens.surface(s.start, s.end), s.source);
    }
    Ok(())
}
