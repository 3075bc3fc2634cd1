//! Two-stream inference (rules alongside the tagger), conflict resolution and
//! post-processing, plus the training wiring.
//!
//! Config files are TOML; relative paths resolve against the config file.
//!
//! ```toml
//! schema = "schema.toml"
//! rules = "rules.toml"
//! model = "model.bin"            # or: adapter = "exec:python3 tagger.py"
//! gazetteer = "gazetteer.tsv"
//! timeout_ms = 2000
//! parallel_streams = true
//!
//! [post]
//! name_like = ["PERSON", "ORGANIZATION", "BANK"]
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::adapter::{Endpoint, LineChannel};
use crate::corpus::{EntitySpan, Record, Source, TokenSequence};
use crate::error::{Error, Result};
use crate::postprocess::{postprocess_all, Gazetteer, PostConfig};
use crate::rules::{apply_rules, load_rules, RuleSet};
use crate::schema::{load_schema, LabelSchema};
use crate::tagger::{self, ExternalTagger, Tagger, TaggerModel, TrainConfig, TrainStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: PathBuf,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub adapter: Option<String>,
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default)]
    pub gazetteer_case_insensitive: bool,
    #[serde(default = "default_policy")]
    pub conflict_policy: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_true")]
    pub parallel_streams: bool,
    #[serde(default)]
    pub post: PostConfig,
}

fn default_policy() -> String {
    "rule_wins".into()
}
fn default_timeout() -> u64 {
    2000
}
fn default_true() -> bool {
    true
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("pipeline config: {e}")))?;
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        abs(&mut c.schema);
        c.rules.iter_mut().for_each(abs);
        c.model.iter_mut().for_each(abs);
        c.gazetteer.iter_mut().for_each(abs);
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        if self.model.is_some() == self.adapter.is_some() {
            return Err(Error::Config("set exactly one of `model` and `adapter`".into()));
        }
        if self.conflict_policy != "rule_wins" {
            return Err(Error::Config(format!(
                "unknown conflict policy {:?} (only \"rule_wins\" exists)",
                self.conflict_policy
            )));
        }
        let files = [Some(&self.schema), self.rules.as_ref(), self.model.as_ref(), self.gazetteer.as_ref()];
        for p in files.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub rule_ms: f64,
    pub model_ms: f64,
    pub post_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub id: String,
    pub spans: Vec<EntitySpan>,
    pub timings: Timings,
}

/// A span as written to output streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanView {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub source: Source,
    pub confidence: f64,
    pub start_char: usize,
    pub end_char: usize,
    pub text: String,
}

impl SpanView {
    pub fn new(s: &EntitySpan, tokens: &TokenSequence, raw: &str) -> Self {
        let (start_char, end_char) = (tokens[s.start].start, tokens[s.end - 1].end);
        Self {
            start: s.start,
            end: s.end,
            label: s.label.clone(),
            source: s.source,
            confidence: s.confidence,
            start_char,
            end_char,
            text: raw[start_char..end_char].to_string(),
        }
    }
}

/// Keeps every rule span and every model span that touches no rule span.
pub fn resolve_conflicts(rule_spans: &[EntitySpan], model_spans: &[EntitySpan]) -> Vec<EntitySpan> {
    let mut out: Vec<EntitySpan> = rule_spans.to_vec();
    out.extend(
        model_spans
            .iter()
            .filter(|m| !rule_spans.iter().any(|r| r.overlaps(m)))
            .cloned(),
    );
    out.sort_by_key(|s| s.start);
    out
}

/// Loaded, validated inference pipeline. Cheap to share across threads.
#[derive(Clone)]
pub struct Pipeline {
    pub schema: Arc<LabelSchema>,
    pub rules: Arc<RuleSet>,
    pub tagger: Arc<dyn Tagger>,
    pub gazetteer: Arc<Gazetteer>,
    pub post: PostConfig,
    pub parallel_streams: bool,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("schema", &self.schema.version)
            .field("rules", &self.rules.rules().len())
            .field("gazetteer", &self.gazetteer.len())
            .finish()
    }
}

impl Pipeline {
    /// Checks that rules emit only rule-bound labels, the tagger matches the
    /// schema, and the gazetteer carries no rule-bound label.
    pub fn new(
        schema: LabelSchema,
        rules: RuleSet,
        tagger: Arc<dyn Tagger>,
        gazetteer: Gazetteer,
        post: PostConfig,
    ) -> Result<Self> {
        rules.check_against(&schema)?;
        tagger.check_schema(&schema)?;
        let bad: Vec<&str> = gazetteer.labels().filter(|l| schema.is_rule_bound(l)).collect();
        if !bad.is_empty() {
            return Err(Error::Config(format!("gazetteer carries rule-bound labels {bad:?}")));
        }
        Ok(Self {
            schema: Arc::new(schema),
            rules: Arc::new(rules),
            tagger,
            gazetteer: Arc::new(gazetteer),
            post,
            parallel_streams: true,
        })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let schema = load_schema(&cfg.schema)?;
        let rules = match &cfg.rules {
            Some(p) => load_rules(p)?,
            None => RuleSet::empty(),
        };
        let tagger: Arc<dyn Tagger> = match (&cfg.model, &cfg.adapter) {
            (Some(p), _) => Arc::new(TaggerModel::load(p)?),
            (None, Some(ep)) => {
                let ch = LineChannel::connect(&ep.parse::<Endpoint>()?, Duration::from_millis(cfg.timeout_ms))?;
                Arc::new(ExternalTagger::new(ch, schema.class_index()))
            }
            (None, None) => unreachable!("validated"),
        };
        let gazetteer = match &cfg.gazetteer {
            Some(p) => Gazetteer::load(p, cfg.gazetteer_case_insensitive)?,
            None => Gazetteer::default(),
        };
        let mut p = Self::new(schema, rules, tagger, gazetteer, cfg.post.clone())?;
        p.parallel_streams = cfg.parallel_streams;
        Ok(p)
    }

    pub fn load(config_path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(&PipelineConfig::load(config_path)?)
    }

    pub fn rule_stream(&self, tokens: &TokenSequence) -> Vec<EntitySpan> {
        apply_rules(tokens, &self.rules)
    }

    pub fn model_stream(&self, tokens: &TokenSequence) -> Result<Vec<EntitySpan>> {
        self.tagger.tag_spans(tokens)
    }

    /// Conflict resolution and post-processing of the two streams' output.
    pub fn finish(&self, tokens: &TokenSequence, rule_spans: &[EntitySpan], model_spans: &[EntitySpan]) -> Vec<EntitySpan> {
        let merged = resolve_conflicts(rule_spans, model_spans);
        postprocess_all(&merged, tokens, &self.schema, &self.gazetteer, &self.post)
    }

    pub fn infer_tokens(&self, id: &str, tokens: &TokenSequence) -> Result<PipelineOutput> {
        let timed = |f: &dyn Fn() -> Vec<EntitySpan>| {
            let t = Instant::now();
            let v = f();
            (v, t.elapsed().as_secs_f64() * 1e3)
        };
        let run_model = || {
            let t = Instant::now();
            self.model_stream(tokens).map(|v| (v, t.elapsed().as_secs_f64() * 1e3))
        };
        let ((rule_spans, rule_ms), model) = if self.parallel_streams {
            std::thread::scope(|sc| {
                let h = sc.spawn(|| timed(&|| self.rule_stream(tokens)));
                let m = run_model();
                (h.join().expect("rule stream panicked"), m)
            })
        } else {
            (timed(&|| self.rule_stream(tokens)), run_model())
        };
        let (model_spans, model_ms) = model?;
        let t = Instant::now();
        let spans = self.finish(tokens, &rule_spans, &model_spans);
        Ok(PipelineOutput {
            id: id.to_string(),
            spans,
            timings: Timings {
                rule_ms,
                model_ms,
                post_ms: t.elapsed().as_secs_f64() * 1e3,
            },
        })
    }

    pub fn infer(&self, record: &Record) -> Result<PipelineOutput> {
        self.infer_tokens(&record.id, &record.tokens)
    }

    /// The record with `predicted` filled in.
    pub fn annotate(&self, record: &Record) -> Result<Record> {
        let out = self.infer(record)?;
        let mut r = record.clone();
        r.predicted = Some(out.spans);
        Ok(r)
    }
}

/// Copy of `records` with rule-bound gold spans removed.
pub fn mask_rule_bound(records: &[Record], schema: &LabelSchema) -> Vec<Record> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(g) = &mut r.gold {
                g.retain(|s| !schema.is_rule_bound(&s.label));
            }
            r
        })
        .collect()
}

/// Trains (or with `resume`, continues training) the tagger on `corpus` with
/// rule-bound gold spans masked out.
pub fn run_training(
    corpus: &[Record],
    schema: &LabelSchema,
    cfg: &TrainConfig,
    resume: Option<TaggerModel>,
) -> Result<(TaggerModel, TrainStats)> {
    let masked = mask_rule_bound(corpus, schema);
    match resume {
        Some(m) => tagger::train_from(m, &masked, schema, cfg),
        None => tagger::train(&masked, schema, cfg),
    }
}
