//! Entity-level scores and the error taxonomy for a small reviewed set.

use hybrid_ner::eval::evaluate_corpus;
use hybrid_ner::synth::error_review_corpus;

fn main() -> hybrid_ner::Result<()> {
    let report = evaluate_corpus(&error_review_corpus())?;
    print!("{report}");
    let t = report.taxonomy;
    println!("partial share {:.2}, missing share {:.2}", t.partial_share(), t.missing_share());
    println!("{}", report.to_json_line());
    Ok(())
}
