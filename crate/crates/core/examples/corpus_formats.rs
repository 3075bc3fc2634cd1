//! Converts a small corpus between CoNLL, JSONL and BIO tags.

use hybrid_ner::corpus::{bio_to_spans, read_conll, read_jsonl, spans_to_bio, write_conll, write_jsonl};

const CONLL: &str = "# id = a\nkhách\tO\nNguyễn\tB-PERSON\nLan\tI-PERSON\nqua\tO\nVietcombank\tB-BANK\n\n";

fn main() -> hybrid_ner::Result<()> {
    let records = read_conll(CONLL)?;
    let jsonl = write_jsonl(&records)?;
    print!("{jsonl}");

    let back = read_jsonl(&jsonl)?;
    assert_eq!(back[0].gold, records[0].gold);
    print!("{}", write_conll(&back)?);

    let r = &records[0];
    let tags = spans_to_bio(r.gold.as_deref().unwrap_or_default(), r.len())?;
    let shown: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
    println!("{}", shown.join(" "));
    assert_eq!(bio_to_spans(&tags), *r.gold.as_ref().unwrap());
    Ok(())
}
