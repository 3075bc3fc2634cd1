//! Compares the hybrid pipeline against the tagger alone on orders whose ID
//! numbers and order codes only a validator can tell apart.

use std::sync::Arc;

use hybrid_ner::corpus::Record;
use hybrid_ner::eval::evaluate_corpus;
use hybrid_ner::pipeline::{run_training, Pipeline};
use hybrid_ner::postprocess::{Gazetteer, PostConfig};
use hybrid_ner::rules::RuleSet;
use hybrid_ner::synth::{rule_favorable_corpus, rule_favorable_rules, rule_favorable_schema};
use hybrid_ner::tagger::TrainConfig;

fn score(p: &Pipeline, test: &[Record]) -> hybrid_ner::Result<f64> {
    let annotated = test.iter().map(|r| p.annotate(r)).collect::<hybrid_ner::Result<Vec<_>>>()?;
    Ok(evaluate_corpus(&annotated)?.micro.f1)
}

fn main() -> hybrid_ner::Result<()> {
    let train = rule_favorable_corpus(1000, 1);
    let test = rule_favorable_corpus(300, 2);
    let cfg = TrainConfig { epochs: 8, seed: 1, ..TrainConfig::default() };

    let schema = rule_favorable_schema();
    let (m, _) = run_training(&train, &schema, &cfg, None)?;
    let hybrid = Pipeline::new(schema.clone(), rule_favorable_rules(), Arc::new(m), Gazetteer::default(), PostConfig::default())?;

    let plain = schema.without_rule_bindings();
    let (m, _) = run_training(&train, &plain, &cfg, None)?;
    let model_only = Pipeline::new(plain, RuleSet::empty(), Arc::new(m), Gazetteer::default(), PostConfig::default())?;

    let (h, b) = (score(&hybrid, &test)?, score(&model_only, &test)?);
    println!("hybrid micro-F1     {h:.4}");
    println!("model-only micro-F1 {b:.4}");
    println!("margin              {:+.4}", h - b);
    Ok(())
}
