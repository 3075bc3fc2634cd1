//! Starts a server on an ephemeral port, fires a Poisson workload at it and
//! prints both sides' numbers.

use std::sync::Arc;
use std::time::Duration;

use hybrid_ner::pipeline::{run_training, Pipeline};
use hybrid_ner::postprocess::{Gazetteer, PostConfig};
use hybrid_ner::serve::{run_loadgen, serve, LoadgenConfig, ServerConfig};
use hybrid_ner::synth::{rule_favorable_corpus, rule_favorable_rules, rule_favorable_schema, sample_texts};
use hybrid_ner::tagger::TrainConfig;

fn main() -> hybrid_ner::Result<()> {
    let schema = rule_favorable_schema();
    let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let (m, _) = run_training(&rule_favorable_corpus(500, 1), &schema, &cfg, None)?;
    let p = Pipeline::new(schema, rule_favorable_rules(), Arc::new(m), Gazetteer::default(), PostConfig::default())?;

    let server = serve(p, &ServerConfig::default(), "127.0.0.1:0")?;
    let report = run_loadgen(&LoadgenConfig {
        target: server.local_addr().to_string(),
        rate: Some(500.0),
        requests: 2000,
        seed: 1,
        texts: sample_texts(),
        timeout: Duration::from_secs(30),
        shutdown_after: false,
    })?;
    println!("client: {}", serde_json::to_string_pretty(&report)?);
    println!("server: {}", serde_json::to_string_pretty(&server.shutdown())?);
    Ok(())
}
