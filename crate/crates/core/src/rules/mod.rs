//! Deterministic extraction of rule-bound entities.
//!
//! Rules files are TOML. Paths inside are relative to the rules file.
//!
//! ```toml
//! [[rules]]
//! id = "cin"
//! kind = "cin"
//! label = "CIN"
//! provinces = "provinces.txt"
//! reference_date = "2025-01-01"
//! age_range = [0, 120]
//!
//! [[rules]]
//! id = "order"
//! kind = "order_code"
//! label = "ORDER_CODE"
//! shop = { alphabet = "A-Z", min = 3, max = 3 }
//! routing = { alphabet = "0-9", min = 2, max = 2 }
//! delimiter = ""
//!
//! [[rules]]
//! id = "temporal"
//! kind = "temporal"
//! # date / time / duration labels default to DATE / TIME / DURATION
//!
//! [[rules]]
//! id = "phone"
//! kind = "pattern"
//! label = "PHONE"
//! pattern = "0\\d{9}"
//! priority = 5
//! ```
//!
//! Rules run in descending `priority` (default 0), ties in file order.

mod cin;
mod order_code;
mod temporal;

pub use cin::{load_province_codes, parse_province_codes, validate_cin, CinConfig};
pub use order_code::{valid_tail, validate_order_code, OrderCodeConfig, SegmentPattern, SegmentSpec};
pub use temporal::{find_temporal, find_temporal_with, TemporalLabels};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use regex::Regex;
use serde::Deserialize;

use crate::corpus::{EntitySpan, Source, TokenSequence};
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

/// Extra check applied to a token after a pattern matched it.
pub type Validator = Arc<dyn Fn(&str) -> bool + Send + Sync>;

/// What a rule matches.
#[derive(Clone)]
pub enum RuleKind {
    Cin { config: CinConfig, label: String },
    OrderCode { config: OrderCodeConfig, label: String },
    Temporal { labels: TemporalLabels },
    /// Whole-token regular expression with an optional validator.
    Pattern {
        regex: Regex,
        label: String,
        validator: Option<Validator>,
    },
}

impl fmt::Debug for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Cin { label, .. } => write!(f, "Cin({label})"),
            RuleKind::OrderCode { label, .. } => write!(f, "OrderCode({label})"),
            RuleKind::Temporal { labels } => write!(f, "Temporal({labels:?})"),
            RuleKind::Pattern {
                regex,
                label,
                validator,
            } => write!(
                f,
                "Pattern({label}, /{regex}/{})",
                if validator.is_some() { " + validator" } else { "" }
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub kind: RuleKind,
}

impl Rule {
    pub fn labels(&self) -> Vec<&str> {
        match &self.kind {
            RuleKind::Cin { label, .. }
            | RuleKind::OrderCode { label, .. }
            | RuleKind::Pattern { label, .. } => vec![label.as_str()],
            RuleKind::Temporal { labels } => labels.all().to_vec(),
        }
    }

    fn token_label(&self, text: &str) -> Option<&str> {
        match &self.kind {
            RuleKind::Cin { config, label } => validate_cin(text, config).then_some(label.as_str()),
            RuleKind::OrderCode { config, label } => {
                validate_order_code(text, config).then_some(label.as_str())
            }
            RuleKind::Pattern {
                regex,
                label,
                validator,
            } => {
                let whole = regex
                    .find(text)
                    .is_some_and(|m| m.start() == 0 && m.end() == text.len());
                (whole && validator.as_ref().is_none_or(|v| v(text))).then_some(label.as_str())
            }
            RuleKind::Temporal { .. } => None,
        }
    }

    /// Every match of this rule alone, possibly overlapping other rules.
    pub fn matches(&self, tokens: &TokenSequence) -> Vec<EntitySpan> {
        if let RuleKind::Temporal { labels } = &self.kind {
            return find_temporal_with(tokens, labels);
        }
        tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                self.token_label(&t.text)
                    .map(|l| EntitySpan::new(i, i + 1, l).with_source(Source::Rule))
            })
            .collect()
    }
}

/// Ordered rules; earlier rules win ties.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        let mut seen = HashSet::new();
        let dups: Vec<String> = rules
            .iter()
            .filter(|r| !seen.insert(r.id.clone()))
            .map(|r| format!("rule id {:?} declared twice", r.id))
            .collect();
        if dups.is_empty() {
            Ok(Self { rules })
        } else {
            Err(Error::Rules(dups))
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Every emitted label must be rule-bound in `schema` to this rule's id.
    pub fn check_against(&self, schema: &LabelSchema) -> Result<()> {
        let mut v = Vec::new();
        for r in &self.rules {
            for l in r.labels() {
                match schema.rule_bound.get(l) {
                    None => v.push(format!("rule {:?} emits {l:?}, which is not rule-bound", r.id)),
                    Some(owner) if *owner != r.id => v.push(format!(
                        "rule {:?} emits {l:?}, which the schema binds to rule {owner:?}",
                        r.id
                    )),
                    _ => {}
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Rules(v))
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_toml_str_with(text, base_dir, &HashMap::new())
    }

    /// Parses a rules file; `validators` resolves `validator = "name"` entries.
    pub fn from_toml_str_with(
        text: &str,
        base_dir: &Path,
        validators: &HashMap<String, Validator>,
    ) -> Result<Self> {
        let file: RawRulesFile =
            toml::from_str(text).map_err(|e| Error::Rules(vec![format!("parse error: {e}")]))?;
        let mut indexed: Vec<(i64, usize, Rule)> = Vec::new();
        let mut errs = Vec::new();
        for (i, raw) in file.rules.into_iter().enumerate() {
            match raw.kind.build(base_dir, validators) {
                Ok(kind) => indexed.push((raw.priority, i, Rule { id: raw.id, kind })),
                Err(e) => errs.push(format!("rule {:?}: {e}", raw.id)),
            }
        }
        if !errs.is_empty() {
            return Err(Error::Rules(errs));
        }
        indexed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        Self::new(indexed.into_iter().map(|(_, _, r)| r).collect())
    }
}

/// Reads a rules file.
pub fn load_rules(path: impl AsRef<Path>) -> Result<RuleSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    RuleSet::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Runs every rule and resolves overlaps: longer spans first, then earlier
/// rules. Output is non-overlapping and sorted by start, all with source
/// RULE and confidence 1.0.
pub fn apply_rules(tokens: &TokenSequence, rules: &RuleSet) -> Vec<EntitySpan> {
    let mut cands: Vec<(usize, EntitySpan)> = rules
        .rules
        .iter()
        .enumerate()
        .flat_map(|(ri, r)| r.matches(tokens).into_iter().map(move |s| (ri, s)))
        .collect();
    cands.sort_by(|(ra, a), (rb, b)| {
        b.len()
            .cmp(&a.len())
            .then(ra.cmp(rb))
            .then(a.start.cmp(&b.start))
    });
    let mut taken = vec![false; tokens.len()];
    let mut out = Vec::new();
    for (_, s) in cands {
        if (s.start..s.end).any(|i| taken[i]) {
            continue;
        }
        taken[s.start..s.end].iter_mut().for_each(|t| *t = true);
        out.push(s.with_source(Source::Rule).with_confidence(1.0));
    }
    out.sort_by_key(|s| s.start);
    out
}

#[derive(Debug, Deserialize)]
struct RawRulesFile {
    #[serde(default)]
    rules: Vec<RawRule>,
}

#[derive(Debug, Deserialize)]
struct RawRule {
    id: String,
    #[serde(default)]
    priority: i64,
    #[serde(flatten)]
    kind: RawKind,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawKind {
    Cin {
        label: String,
        #[serde(default)]
        provinces: Option<String>,
        #[serde(default)]
        province_codes: Vec<String>,
        reference_date: String,
        #[serde(default = "default_age_range")]
        age_range: [u32; 2],
    },
    OrderCode {
        label: String,
        shop: SegmentSpec,
        routing: SegmentSpec,
        #[serde(default)]
        delimiter: String,
    },
    Temporal {
        #[serde(flatten)]
        labels: TemporalLabels,
    },
    Pattern {
        label: String,
        pattern: String,
        #[serde(default)]
        validator: Option<String>,
    },
}

fn default_age_range() -> [u32; 2] {
    [0, 120]
}

impl RawKind {
    fn build(self, base: &Path, validators: &HashMap<String, Validator>) -> Result<RuleKind> {
        Ok(match self {
            RawKind::Cin {
                label,
                provinces,
                mut province_codes,
                reference_date,
                age_range,
            } => {
                if let Some(p) = provinces {
                    province_codes.extend(load_province_codes(base.join(p))?);
                }
                let date = NaiveDate::parse_from_str(&reference_date, "%Y-%m-%d")
                    .map_err(|e| Error::Config(format!("reference_date {reference_date:?}: {e}")))?;
                RuleKind::Cin {
                    config: CinConfig::new(province_codes, date, (age_range[0], age_range[1]))?,
                    label,
                }
            }
            RawKind::OrderCode {
                label,
                shop,
                routing,
                delimiter,
            } => RuleKind::OrderCode {
                config: OrderCodeConfig {
                    shop: (&shop).try_into()?,
                    routing: (&routing).try_into()?,
                    delimiter,
                },
                label,
            },
            RawKind::Temporal { labels } => RuleKind::Temporal { labels },
            RawKind::Pattern {
                label,
                pattern,
                validator,
            } => {
                if pattern.is_empty() {
                    return Err(Error::Config("empty pattern".into()));
                }
                let regex = Regex::new(&pattern)
                    .map_err(|e| Error::Config(format!("pattern {pattern:?}: {e}")))?;
                let validator = validator
                    .map(|name| {
                        validators
                            .get(&name)
                            .cloned()
                            .ok_or_else(|| Error::Config(format!("unknown validator {name:?}")))
                    })
                    .transpose()?;
                RuleKind::Pattern {
                    regex,
                    label,
                    validator,
                }
            }
        })
    }
}

/// Labels each rule emits, keyed by rule id.
pub fn emitted_labels(rules: &RuleSet) -> BTreeMap<String, Vec<String>> {
    rules
        .rules
        .iter()
        .map(|r| (r.id.clone(), r.labels().iter().map(|s| s.to_string()).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Record;

    pub(crate) fn demo_rules() -> RuleSet {
        RuleSet::from_toml_str(
            r#"
[[rules]]
id = "cin"
kind = "cin"
label = "CIN"
province_codes = ["001", "079"]
reference_date = "2025-01-01"

[[rules]]
id = "order"
kind = "order_code"
label = "ORDER_CODE"
shop = { alphabet = "A-Z", min = 3, max = 3 }
routing = { alphabet = "0-9", min = 2, max = 2 }

[[rules]]
id = "temporal"
kind = "temporal"
"#,
            Path::new("."),
        )
        .unwrap()
    }

    #[test]
    fn cin_token_becomes_one_span() {
        let r = Record::from_text("x", "CCCD của tôi là 001085123456 nhé");
        let spans = apply_rules(&r.tokens, &demo_rules());
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].key(), (4, 5, "CIN"));
        assert_eq!(spans[0].source, Source::Rule);
        assert_eq!(spans[0].confidence, 1.0);
    }

    #[test]
    fn empty_rule_set_finds_nothing() {
        let r = Record::from_text("x", "001085123456 ngày 5 tháng 3");
        assert!(apply_rules(&r.tokens, &RuleSet::empty()).is_empty());
    }

    #[test]
    fn equal_length_tie_goes_to_earlier_rule() {
        let text = r#"
[[rules]]
id = "ymd"
kind = "pattern"
label = "CUSTOM_DATE"
pattern = "\\d{2}/\\d{2}/\\d{4}"

[[rules]]
id = "temporal"
kind = "temporal"
"#;
        let rules = RuleSet::from_toml_str(text, Path::new(".")).unwrap();
        let r = Record::from_text("x", "hẹn 12/05/2024");
        let spans = apply_rules(&r.tokens, &rules);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].label, "CUSTOM_DATE");

        // swapping priority flips the winner
        let flipped = text.replace("id = \"temporal\"\nkind", "id = \"temporal\"\npriority = 1\nkind");
        let rules = RuleSet::from_toml_str(&flipped, Path::new(".")).unwrap();
        assert_eq!(apply_rules(&r.tokens, &rules)[0].label, "DATE");
    }

    #[test]
    fn longer_match_beats_rule_order() {
        let text = r#"
[[rules]]
id = "num"
kind = "pattern"
label = "NUMBER"
pattern = "\\d+"

[[rules]]
id = "temporal"
kind = "temporal"
"#;
        let rules = RuleSet::from_toml_str(text, Path::new(".")).unwrap();
        let r = Record::from_text("x", "trong 3 ngày");
        let spans = apply_rules(&r.tokens, &rules);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].key(), (1, 3, "DURATION"));
    }

    #[test]
    fn validator_hook_filters_matches() {
        let text = r#"
[[rules]]
id = "phone"
kind = "pattern"
label = "PHONE"
pattern = "0\\d{9}"
validator = "mobile"
"#;
        let mut v: HashMap<String, Validator> = HashMap::new();
        v.insert("mobile".into(), Arc::new(|s: &str| s.starts_with("09")));
        let rules = RuleSet::from_toml_str_with(text, Path::new("."), &v).unwrap();
        let r = Record::from_text("x", "gọi 0912345678 hoặc 0212345678");
        let spans = apply_rules(&r.tokens, &rules);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].start, 1);
        assert!(RuleSet::from_toml_str(text, Path::new(".")).is_err(), "unknown validator");
    }

    #[test]
    fn pattern_must_cover_whole_token() {
        let text = "[[rules]]\nid = \"p\"\nkind = \"pattern\"\nlabel = \"P\"\npattern = \"\\\\d{3}\"\n";
        let rules = RuleSet::from_toml_str(text, Path::new(".")).unwrap();
        let r = Record::from_text("x", "123 1234");
        assert_eq!(apply_rules(&r.tokens, &rules).len(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "[[rules]]\nid = \"t\"\nkind = \"temporal\"\n[[rules]]\nid = \"t\"\nkind = \"temporal\"\n";
        assert!(matches!(
            RuleSet::from_toml_str(text, Path::new(".")),
            Err(Error::Rules(_))
        ));
    }

    #[test]
    fn schema_binding_checked() {
        let schema = LabelSchema::from_toml_str(
            r#"
version = "t"
labels = ["BANK", "CIN", "ORDER_CODE", "DATE", "TIME", "DURATION"]
[rule_bound]
CIN = "cin"
ORDER_CODE = "order"
DATE = "temporal"
TIME = "temporal"
"#,
        )
        .unwrap();
        let err = demo_rules().check_against(&schema).unwrap_err();
        let Error::Rules(v) = err else { panic!() };
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("DURATION"));
    }

    #[test]
    fn mixed_sentence() {
        let r = Record::from_text(
            "x",
            "Đơn ABC01912345678 giao ngày 5 tháng 3 năm 2024 lúc 14:30, CCCD 079199123456.",
        );
        let spans = apply_rules(&r.tokens, &demo_rules());
        let labels: Vec<&str> = spans.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["ORDER_CODE", "DATE", "TIME", "CIN"]);
        assert!(spans.windows(2).all(|w| w[0].end <= w[1].start));
    }

    #[test]
    fn deterministic() {
        let r = Record::from_text("x", "ngày 5 tháng 3 001085123456 3 ngày");
        let a = apply_rules(&r.tokens, &demo_rules());
        let b = apply_rules(&r.tokens, &demo_rules());
        assert_eq!(a, b);
    }
}
