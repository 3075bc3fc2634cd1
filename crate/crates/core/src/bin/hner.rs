use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hybrid_ner::augment::{augment_synonyms, recombine_entities, AugmentConfig, SynonymLexicon};
use hybrid_ner::corpus::{load_corpus, write_conll_with, write_jsonl, Format, Record, SpanSet};
use hybrid_ner::eval::{attach_predictions, evaluate_corpus};
use hybrid_ner::pipeline::{run_training, Pipeline};
use hybrid_ner::rules::load_rules;
use hybrid_ner::schema::load_schema;
use hybrid_ner::serve::{run_loadgen, serve, BatchPolicy, LoadgenConfig, ServerConfig};
use hybrid_ner::tagger::{TaggerModel, TrainConfig};
use hybrid_ner::{synth, Error};

/// Hybrid rule + statistical named-entity recognition.
#[derive(Parser)]
#[command(name = "hner", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a label schema (and optionally a rules file against it).
    SchemaCheck {
        schema: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Train the tagger on an annotated corpus.
    Train(TrainArgs),
    /// Run the full pipeline over a corpus.
    Tag {
        /// CoNLL, JSONL or one-text-per-line `.txt` file.
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutFormat::Jsonl)]
        format: OutFormat,
    },
    /// Score predictions against gold at the entity level.
    Eval {
        gold: PathBuf,
        pred: PathBuf,
        /// Exit 1 when micro-F1 falls below this.
        #[arg(long)]
        min_f1: Option<f64>,
        /// Print the error taxonomy.
        #[arg(long)]
        taxonomy: bool,
        /// Print the report as one JSON line instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Add synonym-replaced and entity-recombined variants to a corpus.
    Augment {
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-token replacement probability.
        #[arg(long, default_value_t = 0.15)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Synonym variants per record.
        #[arg(long, default_value_t = 2)]
        variants: usize,
        /// Recombination pairs per record (0 disables).
        #[arg(long, default_value_t = 0)]
        recombine: usize,
    },
    /// Serve the pipeline over line-delimited JSON on TCP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Batching policy TOML; defaults apply when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 2)]
        rule_workers: usize,
        #[arg(long, default_value_t = 2)]
        model_workers: usize,
    },
    /// Send a seeded Poisson or burst workload to a running server.
    Loadgen {
        /// host:port
        #[arg(long)]
        target: String,
        /// Requests per second; 0 sends a burst.
        #[arg(long, default_value_t = 200.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        requests: usize,
        /// One text per line; built-in samples when omitted.
        #[arg(long)]
        texts: Option<PathBuf>,
        /// Seconds to wait for the last responses.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Send the shutdown verb when done.
        #[arg(long)]
        shutdown: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    corpus: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Checked against the schema; rule-bound labels are never learned.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Continue from an existing model.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Sentences per minibatch.
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    dev_fraction: f64,
    /// Hashed feature space size.
    #[arg(long, default_value_t = 1 << 18)]
    dim: usize,
    #[arg(long)]
    class_weighting: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Conll,
    Jsonl,
}

fn write_records(path: &Path, records: &[Record], which: SpanSet) -> hybrid_ner::Result<()> {
    let text = match Format::from_path(path) {
        Format::Jsonl => write_jsonl(records)?,
        _ => write_conll_with(records, which)?,
    };
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> hybrid_ner::Result<()> {
    match cli.cmd {
        Cmd::SchemaCheck { schema, rules } => {
            let s = load_schema(&schema)?;
            if let Some(r) = rules {
                load_rules(&r)?.check_against(&s)?;
            }
            println!("schema {} ok", s.version);
            println!("  fine labels : {}", s.fine_labels.join(" "));
            for g in &s.groups {
                println!("  group {:<12}: {} (default {}, window {})", g.group_id, g.members.join(" "), g.default_member, g.cue_window);
            }
            for (l, r) in &s.rule_bound {
                println!("  rule-bound  : {l} ← {r}");
            }
            println!("  model labels: {}", s.model_labels().join(" "));
        }
        Cmd::Train(a) => {
            let schema = load_schema(&a.schema)?;
            if let Some(r) = &a.rules {
                load_rules(r)?.check_against(&schema)?;
            }
            let corpus = load_corpus(&a.corpus)?;
            let resume = a.resume.as_ref().map(TaggerModel::load).transpose()?;
            let cfg = TrainConfig {
                epochs: a.epochs,
                lr: a.lr,
                batch_size: a.batch_size,
                seed: a.seed,
                dev_fraction: a.dev_fraction,
                dim: a.dim,
                class_weighting: a.class_weighting,
                ..TrainConfig::default()
            };
            let (model, stats) = run_training(&corpus, &schema, &cfg, resume)?;
            model.save(&a.out)?;
            for e in &stats.epochs {
                eprintln!(
                    "epoch {:>3}  loss {:.5}  dev F1 {}",
                    e.epoch,
                    e.loss,
                    e.dev_f1.map_or("-".into(), |f| format!("{f:.4}"))
                );
            }
            println!(
                "wrote {} ({} train, {} dev records, final dev F1 {})",
                a.out.display(),
                stats.train_records,
                stats.dev_records,
                stats.final_dev_f1().map_or("-".into(), |f| format!("{f:.4}"))
            );
        }
        Cmd::Tag { input, config, out, format } => {
            let pipeline = Pipeline::load(&config)?;
            let records = load_corpus(&input)?;
            let tagged = records.iter().map(|r| pipeline.annotate(r)).collect::<hybrid_ner::Result<Vec<_>>>()?;
            let text = match format {
                OutFormat::Conll => write_conll_with(&tagged, SpanSet::Predicted)?,
                OutFormat::Jsonl => write_jsonl(&tagged)?,
            };
            fs::write(&out, text)?;
            eprintln!("tagged {} records → {}", tagged.len(), out.display());
        }
        Cmd::Eval { gold, pred, min_f1, taxonomy, json } => {
            let joined = attach_predictions(load_corpus(&gold)?, load_corpus(&pred)?)?;
            let report = evaluate_corpus(&joined)?;
            if json {
                println!("{}", report.to_json_line());
            } else {
                let table = report.to_string();
                let cut = if taxonomy { table.len() } else { table.find("\n\n").map_or(table.len(), |i| i + 1) };
                print!("{}", &table[..cut]);
            }
            if let Some(min) = min_f1 {
                if report.micro.f1 < min {
                    return Err(Error::Config(format!("micro-F1 {:.4} is below --min-f1 {min}", report.micro.f1)));
                }
            }
        }
        Cmd::Augment { corpus, lexicon, out, p, seed, variants, recombine } => {
            let records = load_corpus(&corpus)?;
            let lex = SynonymLexicon::load(&lexicon)?;
            let cfg = AugmentConfig { p, seed, variants, recombine_pairs: recombine };
            let mut all = records.clone();
            let syn = augment_synonyms(&records, &lex, &cfg);
            let rec = if recombine > 0 { recombine_entities(&records, &cfg) } else { Vec::new() };
            eprintln!("{} originals, {} synonym variants, {} recombinations", records.len(), syn.len(), rec.len());
            all.extend(syn);
            all.extend(rec);
            write_records(&out, &all, SpanSet::Gold)?;
        }
        Cmd::Serve { config, policy, port, host, rule_workers, model_workers } => {
            let pipeline = Pipeline::load(&config)?;
            let policy = policy.as_ref().map(BatchPolicy::load).transpose()?.unwrap_or_default();
            let cfg = ServerConfig { policy, rule_workers, model_workers };
            let handle = serve(pipeline, &cfg, &format!("{host}:{port}"))?;
            eprintln!("listening on {}", handle.local_addr());
            let m = handle.wait();
            println!("{}", serde_json::to_string(&m)?);
        }
        Cmd::Loadgen { target, rate, seed, requests, texts, timeout, shutdown } => {
            let texts = match texts {
                Some(p) => fs::read_to_string(p)?.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect(),
                None => synth::sample_texts(),
            };
            let cfg = LoadgenConfig {
                target,
                rate: (rate > 0.0).then_some(rate),
                requests,
                seed,
                texts,
                timeout: Duration::from_secs(timeout),
                shutdown_after: shutdown,
            };
            let rep = run_loadgen(&cfg)?;
            println!("{}", serde_json::to_string(&rep)?);
            if !rep.exactly_once() {
                return Err(Error::Config(format!(
                    "{} missing, {} duplicate, {} unknown responses",
                    rep.missing, rep.duplicates, rep.unknown
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
