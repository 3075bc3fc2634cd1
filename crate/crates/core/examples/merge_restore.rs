//! Trains on the merged MEASUREMENT label and restores chest / waist / hip
//! from the cue word next to each value.

use std::sync::Arc;

use hybrid_ner::pipeline::{run_training, Pipeline};
use hybrid_ner::postprocess::{Gazetteer, PostConfig};
use hybrid_ner::rules::RuleSet;
use hybrid_ner::synth::{measurement_corpus, measurement_schema};
use hybrid_ner::tagger::TrainConfig;

fn main() -> hybrid_ner::Result<()> {
    let schema = measurement_schema();
    println!("model classes: {:?}", schema.class_index().labels);
    let cfg = TrainConfig { epochs: 5, seed: 3, ..TrainConfig::default() };
    let (model, _) = run_training(&measurement_corpus(500, 3, true), &schema, &cfg, None)?;
    let p = Pipeline::new(schema.clone(), RuleSet::empty(), Arc::new(model), Gazetteer::default(), PostConfig::default())?;

    for cues in [true, false] {
        let (mut right, mut total, mut default) = (0, 0, 0);
        for r in measurement_corpus(200, 4, cues) {
            let out = p.infer(&r)?;
            for g in r.gold.iter().flatten().filter(|g| g.label != "PERSON") {
                total += 1;
                if let Some(s) = out.spans.iter().find(|s| (s.start, s.end) == (g.start, g.end)) {
                    right += usize::from(s.label == g.label);
                    default += usize::from(s.label == "CHEST");
                }
            }
        }
        println!("cues={cues:<5}  fine label recovered {right}/{total}  default member {default}/{total}");
    }
    let r = &measurement_corpus(1, 9, true)[0];
    println!("{}", r.raw);
    for s in p.infer(r)?.spans {
        println!("  {:>8}  {}", s.label, r.tokens.surface(s.start, s.end));
    }
    Ok(())
}
