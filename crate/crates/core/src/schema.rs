//! Label schema: fine labels, merged groups with cue lexicons, rule-bound
//! labels, and the class index the tagger learns over.
//!
//! Schema files are TOML:
//!
//! ```toml
//! version = "garment-1"
//! labels = ["BANK", "v1", "v2", "v3", "CIN", "DATE"]
//!
//! [[groups]]
//! id = "body_measurement"
//! members = ["v1", "v2", "v3"]
//! default = "v1"
//! window = 3
//! cues = { v1 = ["chest", "ngực"], v2 = ["waist", "eo"], v3 = ["hip", "hông"] }
//!
//! [rule_bound]
//! CIN = "cin"
//! DATE = "temporal"
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Tag, TagSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSchema {
    version: String,
    labels: Vec<String>,
    #[serde(default)]
    groups: Vec<RawGroup>,
    #[serde(default)]
    rule_bound: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGroup {
    id: String,
    members: Vec<String>,
    default: String,
    #[serde(default = "default_window")]
    window: usize,
    #[serde(default)]
    cues: BTreeMap<String, Vec<String>>,
}

fn default_window() -> usize {
    3
}

/// Related fine labels learned as one merged label and restored by cue words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGroup {
    pub group_id: String,
    pub members: Vec<String>,
    /// Lowercase cue words per member.
    pub cues: BTreeMap<String, Vec<String>>,
    pub default_member: String,
    pub cue_window: usize,
    cue_owner: HashMap<String, usize>,
}

impl LabelGroup {
    /// Index into `members` of the member owning this lowercase cue word.
    pub fn cue_member(&self, word: &str) -> Option<usize> {
        self.cue_owner.get(word).copied()
    }
}

/// A validated label schema. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    pub version: String,
    pub fine_labels: Vec<String>,
    pub groups: Vec<LabelGroup>,
    /// Labels produced only by rules, mapped to the id of the rule producing them.
    pub rule_bound: BTreeMap<String, String>,
    member_group: HashMap<String, usize>,
}

/// Reads and validates a schema file.
pub fn load_schema(path: impl AsRef<Path>) -> Result<LabelSchema> {
    let text = std::fs::read_to_string(path.as_ref())?;
    LabelSchema::from_toml_str(&text)
}

impl LabelSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSchema =
            toml::from_str(text).map_err(|e| Error::Schema(vec![format!("parse error: {e}")]))?;
        Self::build(raw)
    }

    fn build(raw: RawSchema) -> Result<Self> {
        let mut v = Vec::new();
        if raw.version.trim().is_empty() {
            v.push("version must not be empty".to_string());
        }
        if raw.labels.is_empty() {
            v.push("labels must not be empty".to_string());
        }
        let mut fine = HashSet::new();
        for l in &raw.labels {
            if l.is_empty() || l.contains(char::is_whitespace) {
                v.push(format!("label {l:?} must be non-empty without whitespace"));
            }
            if !fine.insert(l.as_str()) {
                v.push(format!("label {l:?} declared twice"));
            }
        }

        let mut member_group: HashMap<String, usize> = HashMap::new();
        let mut group_ids = HashSet::new();
        let mut groups = Vec::new();
        for (gi, g) in raw.groups.iter().enumerate() {
            let gid = &g.id;
            if gid.is_empty() {
                v.push(format!("group #{gi} has an empty id"));
            }
            if fine.contains(gid.as_str()) {
                v.push(format!("group id {gid:?} collides with a fine label"));
            }
            if !group_ids.insert(gid.as_str()) {
                v.push(format!("group id {gid:?} declared twice"));
            }
            if g.members.len() < 2 {
                v.push(format!("group {gid:?} needs at least two members"));
            }
            for m in &g.members {
                if !fine.contains(m.as_str()) {
                    v.push(format!("group {gid:?}: member {m:?} is not a declared label"));
                }
                if raw.rule_bound.contains_key(m) {
                    v.push(format!("group {gid:?}: member {m:?} is rule-bound"));
                }
                if let Some(&other) = member_group.get(m) {
                    v.push(format!(
                        "label {m:?} is in two groups ({:?} and {gid:?})",
                        raw.groups[other].id
                    ));
                } else {
                    member_group.insert(m.clone(), gi);
                }
            }
            if !g.members.contains(&g.default) {
                v.push(format!("group {gid:?}: default {:?} is not a member", g.default));
            }
            if g.window < 1 {
                v.push(format!("group {gid:?}: window must be at least 1"));
            }
            let mut cue_owner: HashMap<String, usize> = HashMap::new();
            for (member, words) in &g.cues {
                let Some(mi) = g.members.iter().position(|m| m == member) else {
                    v.push(format!("group {gid:?}: cues given for non-member {member:?}"));
                    continue;
                };
                for w in words {
                    let lw = w.to_lowercase();
                    if lw.trim().is_empty() {
                        v.push(format!("group {gid:?}: empty cue for {member:?}"));
                    }
                    if let Some(&prev) = cue_owner.get(&lw) {
                        if prev != mi {
                            v.push(format!(
                                "group {gid:?}: cue {lw:?} shared by {:?} and {member:?}",
                                g.members[prev]
                            ));
                        }
                    } else {
                        cue_owner.insert(lw, mi);
                    }
                }
            }
            for m in &g.members {
                let has_cues = g.cues.get(m).is_some_and(|c| !c.is_empty());
                if !has_cues && *m != g.default {
                    v.push(format!(
                        "group {gid:?}: member {m:?} has no cues and is not the default, so it can never be restored"
                    ));
                }
            }
            groups.push(LabelGroup {
                group_id: gid.clone(),
                members: g.members.clone(),
                cues: g
                    .cues
                    .iter()
                    .map(|(k, ws)| (k.clone(), ws.iter().map(|w| w.to_lowercase()).collect()))
                    .collect(),
                default_member: g.default.clone(),
                cue_window: g.window,
                cue_owner,
            });
        }

        for (label, rule) in &raw.rule_bound {
            if !fine.contains(label.as_str()) {
                v.push(format!("rule-bound label {label:?} is not a declared label"));
            }
            if rule.trim().is_empty() {
                v.push(format!("rule-bound label {label:?} has an empty rule id"));
            }
        }

        let schema = LabelSchema {
            version: raw.version,
            fine_labels: raw.labels,
            groups,
            rule_bound: raw.rule_bound,
            member_group,
        };
        if schema.model_labels().is_empty() {
            v.push("no labels are left for the model (merged class count must be at least 1)".into());
        }
        if v.is_empty() {
            Ok(schema)
        } else {
            Err(Error::Schema(v))
        }
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawSchema {
            version: self.version.clone(),
            labels: self.fine_labels.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| RawGroup {
                    id: g.group_id.clone(),
                    members: g.members.clone(),
                    default: g.default_member.clone(),
                    window: g.cue_window,
                    cues: g.cues.clone(),
                })
                .collect(),
            rule_bound: self.rule_bound.clone(),
        };
        toml::to_string(&raw).expect("schema serializes")
    }

    /// The same schema with every label handed to the model. Used for
    /// model-only baselines.
    pub fn without_rule_bindings(&self) -> LabelSchema {
        let mut s = self.clone();
        s.rule_bound.clear();
        s.version = format!("{}+model-only", self.version);
        s
    }

    pub fn is_fine_label(&self, label: &str) -> bool {
        self.fine_labels.iter().any(|l| l == label)
    }

    pub fn is_rule_bound(&self, label: &str) -> bool {
        self.rule_bound.contains_key(label)
    }

    pub fn group(&self, group_id: &str) -> Option<&LabelGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    /// Merged label for a fine label; groups collapse to their id, everything
    /// else maps to itself. Idempotent on group ids.
    pub fn compress<'a>(&'a self, label: &'a str) -> Result<&'a str> {
        if let Some(&gi) = self.member_group.get(label) {
            return Ok(&self.groups[gi].group_id);
        }
        if self.is_fine_label(label) || self.group(label).is_some() {
            return Ok(label);
        }
        Err(Error::UnknownLabel(label.to_string()))
    }

    /// Replaces every label with its merged label; B/I prefixes are kept.
    pub fn compress_tags(&self, tags: &TagSequence) -> Result<TagSequence> {
        tags.iter()
            .map(|t| match t.label() {
                None => Ok(Tag::O),
                Some(l) => {
                    let merged = self.compress(l)?.to_string();
                    Ok(t.map_label(|_| merged))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(TagSequence)
    }

    /// Merged labels the tagger predicts, in declaration order: every
    /// non-rule-bound fine label compressed, duplicates removed.
    pub fn model_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.fine_labels {
            if self.is_rule_bound(l) {
                continue;
            }
            let merged = match self.member_group.get(l) {
                Some(&gi) => self.groups[gi].group_id.clone(),
                None => l.clone(),
            };
            if !out.contains(&merged) {
                out.push(merged);
            }
        }
        out
    }

    pub fn class_index(&self) -> ClassIndex {
        ClassIndex::new(self.model_labels(), self.version.clone())
    }
}

/// Bijection between BIO tags over the merged labels and class ids.
/// Class 0 is `O`; label `i` owns `B` = `2i + 1` and `I` = `2i + 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassIndex {
    pub labels: Vec<String>,
    pub schema_version: String,
}

impl ClassIndex {
    pub fn new(labels: Vec<String>, schema_version: String) -> Self {
        Self {
            labels,
            schema_version,
        }
    }

    /// Number of classes, `2 * labels + 1`.
    pub fn k(&self) -> usize {
        2 * self.labels.len() + 1
    }

    pub fn class_of(&self, tag: &Tag) -> Option<usize> {
        match tag {
            Tag::O => Some(0),
            Tag::B(l) => self.labels.iter().position(|x| x == l).map(|i| 2 * i + 1),
            Tag::I(l) => self.labels.iter().position(|x| x == l).map(|i| 2 * i + 2),
        }
    }

    pub fn tag_of(&self, class: usize) -> Tag {
        match class {
            0 => Tag::O,
            c if c % 2 == 1 => Tag::B(self.labels[(c - 1) / 2].clone()),
            c => Tag::I(self.labels[(c - 2) / 2].clone()),
        }
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

impl std::fmt::Display for ClassIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "schema {} : K = {}", self.schema_version, self.k())?;
        for c in 0..self.k() {
            writeln!(f, "{c:>4}  {}", self.tag_of(c))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::bio_to_spans;

    pub(crate) const GARMENT: &str = r#"
version = "garment-1"
labels = ["BANK", "v1", "v2", "v3", "CIN"]

[[groups]]
id = "body_measurement"
members = ["v1", "v2", "v3"]
default = "v1"
window = 3
cues = { v1 = ["chest", "ngực"], v2 = ["waist", "eo"], v3 = ["hip", "hông"] }

[rule_bound]
CIN = "cin"
"#;

    fn tags(s: &str) -> TagSequence {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    fn violations(text: &str) -> Vec<String> {
        match LabelSchema::from_toml_str(text) {
            Err(Error::Schema(v)) => v,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn garment_schema_is_valid() {
        let s = LabelSchema::from_toml_str(GARMENT).unwrap();
        assert_eq!(s.model_labels(), ["BANK", "body_measurement"]);
        assert_eq!(s.class_index().k(), 5);
        let g = s.group("body_measurement").unwrap();
        assert_eq!(g.cue_member("eo"), Some(1));
        assert_eq!(g.cue_member("hông"), Some(2));
    }

    #[test]
    fn overlapping_cues_rejected() {
        let bad = GARMENT.replace(r#"v2 = ["waist", "eo"]"#, r#"v2 = ["waist", "Chest"]"#);
        let v = violations(&bad);
        assert!(v.iter().any(|m| m.contains("\"chest\" shared")), "{v:?}");
    }

    #[test]
    fn label_in_two_groups_rejected() {
        let bad = format!(
            "{GARMENT}\n[[groups]]\nid = \"g2\"\nmembers = [\"v1\", \"BANK\"]\ndefault = \"BANK\"\n"
        );
        // [[groups]] after [rule_bound] still parses as a second group in TOML
        let v = violations(&bad);
        assert!(v.iter().any(|m| m.contains("in two groups")), "{v:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let bad = r#"
version = ""
labels = ["A", "A"]
[[groups]]
id = "A"
members = ["B"]
default = "C"
window = 0
[rule_bound]
Z = "r"
"#;
        let v = violations(bad);
        assert!(v.len() >= 6, "{v:?}");
    }

    #[test]
    fn unreachable_member_rejected() {
        let bad = GARMENT.replace(r#", v3 = ["hip", "hông"]"#, "");
        let v = violations(&bad);
        assert!(v.iter().any(|m| m.contains("\"v3\" has no cues")), "{v:?}");
    }

    #[test]
    fn compress_examples() {
        let s = LabelSchema::from_toml_str(GARMENT).unwrap();
        assert_eq!(s.compress("v1").unwrap(), "body_measurement");
        assert_eq!(s.compress("BANK").unwrap(), "BANK");
        assert_eq!(s.compress("body_measurement").unwrap(), "body_measurement");
        assert!(matches!(s.compress("nope"), Err(Error::UnknownLabel(_))));
        for l in s.fine_labels.iter().chain(["body_measurement".to_string()].iter()) {
            let once = s.compress(l).unwrap();
            assert_eq!(s.compress(once).unwrap(), once);
        }
    }

    #[test]
    fn compress_tags_keeps_entity_count() {
        let s = LabelSchema::from_toml_str(GARMENT).unwrap();
        assert_eq!(
            s.compress_tags(&tags("B-v1 I-v1 O")).unwrap(),
            tags("B-body_measurement I-body_measurement O")
        );
        let t = tags("B-v1 B-v2");
        let c = s.compress_tags(&t).unwrap();
        assert_eq!(c, tags("B-body_measurement B-body_measurement"));
        assert_eq!(bio_to_spans(&c).len(), bio_to_spans(&t).len());
        assert_eq!(s.compress_tags(&tags("O O")).unwrap(), tags("O O"));
        assert!(s.compress_tags(&tags("B-X")).is_err());
    }

    #[test]
    fn class_index_is_a_bijection() {
        let s = LabelSchema::from_toml_str(GARMENT).unwrap();
        let ci = s.class_index();
        for c in 0..ci.k() {
            assert_eq!(ci.class_of(&ci.tag_of(c)), Some(c));
        }
        assert_eq!(ci.class_of(&Tag::B("CIN".into())), None);
    }

    #[test]
    fn toml_round_trip() {
        let s = LabelSchema::from_toml_str(GARMENT).unwrap();
        let again = LabelSchema::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn model_only_variant_absorbs_rule_labels() {
        let s = LabelSchema::from_toml_str(GARMENT).unwrap().without_rule_bindings();
        assert_eq!(s.model_labels(), ["BANK", "body_measurement", "CIN"]);
    }
}
