//! Span repair after tagging: reconstruction, overlap merging, list
//! splitting and fine-label restoration.

mod gazetteer;

pub use gazetteer::{Gazetteer, GazetteerHit};

use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, Source, TokenSequence};
use crate::schema::LabelSchema;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Compared against lowercased token text.
    pub separators: BTreeSet<String>,
    /// Fragments shorter than this are dropped.
    pub min_fragment: usize,
    /// Labels whose spans are never split, e.g. addresses with commas.
    pub exempt_labels: BTreeSet<String>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            separators: [",", ";", "/", "và", "hoặc", "and", "or"]
                .into_iter()
                .map(String::from)
                .collect(),
            min_fragment: 1,
            exempt_labels: ["ADDRESS".to_string()].into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostConfig {
    pub split: SplitConfig,
    /// Labels allowed to absorb neighboring capitalized tokens.
    pub name_like: BTreeSet<String>,
    /// Add POST spans for gazetteer forms that no span touches.
    pub annotate_gazetteer: bool,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            name_like: ["PERSON", "ORGANIZATION", "BANK"].into_iter().map(String::from).collect(),
            annotate_gazetteer: true,
        }
    }
}

fn capitalized(w: &str) -> bool {
    w.chars().next().is_some_and(char::is_uppercase)
}

/// Longest same-label form containing `s` (ties to the leftmost).
fn containing_form<'g>(s: &EntitySpan, hits: &[GazetteerHit<'g>]) -> Option<GazetteerHit<'g>> {
    hits.iter()
        .filter(|h| h.label == s.label && h.start <= s.start && s.end <= h.end)
        .min_by_key(|h| (Reverse(h.end - h.start), h.start))
        .copied()
}

fn extend_one(mut s: EntitySpan, tokens: &TokenSequence, hits: &[GazetteerHit], cfg: &PostConfig) -> EntitySpan {
    loop {
        let before = (s.start, s.end);
        match containing_form(&s, hits) {
            Some(h) => {
                s.start = h.start;
                s.end = h.end;
            }
            None if cfg.name_like.contains(&s.label)
                && (s.start..s.end).all(|i| capitalized(&tokens[i].text)) =>
            {
                while s.start > 0 && capitalized(&tokens[s.start - 1].text) {
                    s.start -= 1;
                }
                while s.end < tokens.len() && capitalized(&tokens[s.end].text) {
                    s.end += 1;
                }
            }
            None => {}
        }
        if (s.start, s.end) == before {
            return s;
        }
        if s.source == Source::Model {
            s.source = Source::Post;
        }
    }
}

/// Extends partial spans to full gazetteer forms, or for name-like labels to
/// the surrounding run of capitalized tokens, and (optionally) annotates
/// gazetteer forms no span touches. Output is non-overlapping.
pub fn reconstruct_spans(
    spans: &[EntitySpan],
    tokens: &TokenSequence,
    gazetteer: &Gazetteer,
    cfg: &PostConfig,
) -> Vec<EntitySpan> {
    let hits = gazetteer.find_all(tokens);
    let extended: Vec<EntitySpan> = spans
        .iter()
        .map(|s| extend_one(s.clone(), tokens, &hits, cfg))
        .collect();
    let mut out = merge_overlaps(&extended);
    if cfg.annotate_gazetteer {
        let mut maximal: Vec<&GazetteerHit> = hits
            .iter()
            .filter(|h| {
                !hits.iter().any(|o| {
                    o.label == h.label && o.start <= h.start && h.end <= o.end && o.end - o.start > h.end - h.start
                })
            })
            .collect();
        maximal.sort_by_key(|h| (Reverse(h.end - h.start), h.start, h.label));
        let mut taken: Vec<bool> = vec![false; tokens.len()];
        for s in &out {
            taken[s.start..s.end].iter_mut().for_each(|t| *t = true);
        }
        for h in maximal {
            if taken[h.start..h.end].iter().any(|&t| t) {
                continue;
            }
            taken[h.start..h.end].iter_mut().for_each(|t| *t = true);
            out.push(EntitySpan::new(h.start, h.end, h.label).with_source(Source::Post));
        }
        out.sort_by_key(|s| s.start);
    }
    out
}

/// Order used inside one label: longer, then leftmost, then source priority,
/// then confidence.
fn within_label_rank(s: &EntitySpan) -> impl Ord {
    (
        Reverse(s.len()),
        s.start,
        Reverse(s.source.priority()),
        Reverse(ordered(s.confidence)),
    )
}

/// Order used across labels: source priority, then longer, leftmost, label.
fn across_label_rank(s: &EntitySpan) -> impl Ord + '_ {
    (
        Reverse(s.source.priority()),
        Reverse(s.len()),
        s.start,
        s.label.as_str(),
        Reverse(ordered(s.confidence)),
    )
}

fn ordered(x: f64) -> i64 {
    // confidences live in [0, 1]; fixed-point keeps Ord without NaN games
    (x * 1e12).round() as i64
}

fn greedy(cands: Vec<&EntitySpan>) -> Vec<&EntitySpan> {
    let mut kept: Vec<&EntitySpan> = Vec::with_capacity(cands.len());
    for c in cands {
        if !kept.iter().any(|k| k.overlaps(c)) {
            kept.push(c);
        }
    }
    kept
}

/// Resolves overlaps. Same-label conflicts keep the longest span (ties to the
/// leftmost, then RULE > POST > MODEL); remaining cross-label conflicts keep
/// the higher-priority source, then the longer span. Spans displaced only by
/// spans that were themselves dropped are then re-added in cross-label order,
/// so the result is maximal. Sorted output.
pub fn merge_overlaps(spans: &[EntitySpan]) -> Vec<EntitySpan> {
    let labels: BTreeSet<&str> = spans.iter().map(|s| s.label.as_str()).collect();
    let mut survivors: Vec<&EntitySpan> = Vec::new();
    for l in labels {
        let mut same: Vec<&EntitySpan> = spans.iter().filter(|s| s.label == l).collect();
        same.sort_by_key(|s| within_label_rank(s));
        survivors.extend(greedy(same));
    }
    survivors.sort_by_key(|s| across_label_rank(s));
    let mut kept = greedy(survivors);
    // a span that lost to a since-dropped rival comes back if it fits
    let mut rest: Vec<&EntitySpan> = spans.iter().collect();
    rest.sort_by_key(|s| across_label_rank(s));
    for c in rest {
        if !kept.iter().any(|k| k.overlaps(c)) {
            kept.push(c);
        }
    }
    let mut out: Vec<EntitySpan> = kept.into_iter().cloned().collect();
    out.sort_by(|a, b| a.start.cmp(&b.start).then(a.end.cmp(&b.end)));
    out
}

/// Splits spans at separator tokens. RULE spans and exempt labels are left
/// alone; fragments are sourced POST.
pub fn split_lists(spans: &[EntitySpan], tokens: &TokenSequence, cfg: &SplitConfig) -> Vec<EntitySpan> {
    let is_sep = |i: usize| cfg.separators.contains(&tokens[i].text.to_lowercase());
    let mut out = Vec::new();
    for s in spans {
        if s.source == Source::Rule
            || cfg.exempt_labels.contains(&s.label)
            || !(s.start..s.end).any(is_sep)
        {
            out.push(s.clone());
            continue;
        }
        let mut frag_start = s.start;
        for i in s.start..=s.end {
            if i == s.end || is_sep(i) {
                if i - frag_start >= cfg.min_fragment.max(1) {
                    let mut f = s.clone();
                    f.start = frag_start;
                    f.end = i;
                    f.source = Source::Post;
                    out.push(f);
                }
                frag_start = i + 1;
            }
        }
    }
    out
}

/// Maps spans carrying a group id to the member whose cue word is nearest
/// within the group's window (ties to the preceding side); no cue gives the
/// group's default member.
pub fn restore_fine_labels(spans: &[EntitySpan], tokens: &TokenSequence, schema: &LabelSchema) -> Vec<EntitySpan> {
    spans
        .iter()
        .map(|s| {
            let Some(g) = schema.group(&s.label) else {
                return s.clone();
            };
            let cue_at = |i: usize| g.cue_member(&tokens[i].text.to_lowercase());
            let mut member = None;
            for d in 1..=g.cue_window {
                let before = s.start.checked_sub(d).and_then(cue_at);
                let after = (s.end + d - 1 < tokens.len()).then(|| cue_at(s.end + d - 1)).flatten();
                if let Some(m) = before.or(after) {
                    member = Some(m);
                    break;
                }
            }
            let mut out = s.clone();
            out.label = member.map_or_else(|| g.default_member.clone(), |m| g.members[m].clone());
            out
        })
        .collect()
}

/// reconstruct → merge → split → merge → restore.
pub fn postprocess_all(
    spans: &[EntitySpan],
    tokens: &TokenSequence,
    schema: &LabelSchema,
    gazetteer: &Gazetteer,
    cfg: &PostConfig,
) -> Vec<EntitySpan> {
    let s = reconstruct_spans(spans, tokens, gazetteer, cfg);
    let s = merge_overlaps(&s);
    let s = split_lists(&s, tokens, &cfg.split);
    let s = merge_overlaps(&s);
    restore_fine_labels(&s, tokens, schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(w: &[&str]) -> TokenSequence {
        TokenSequence::from_words(w).1
    }

    fn span(a: usize, b: usize, l: &str, src: Source) -> EntitySpan {
        EntitySpan::new(a, b, l).with_source(src)
    }

    fn keys(v: &[EntitySpan]) -> Vec<(usize, usize, &str)> {
        v.iter().map(EntitySpan::key).collect()
    }

    #[test]
    fn reconstruct_from_gazetteer() {
        let t = toks(&["Pham", "Minh", "Chinh", "phát", "biểu"]);
        let g = Gazetteer::parse("PERSON\tPham Minh Chinh\n", false).unwrap();
        let out = reconstruct_spans(&[span(0, 1, "PERSON", Source::Model)], &t, &g, &PostConfig::default());
        assert_eq!(keys(&out), [(0, 3, "PERSON")]);
        assert_eq!(out[0].source, Source::Post);
        // already complete
        let again = reconstruct_spans(&out, &t, &g, &PostConfig::default());
        assert_eq!(again, out);
    }

    #[test]
    fn no_evidence_no_extension() {
        let t = toks(&["Vietcom", "thông", "báo"]);
        let s = [span(0, 1, "BANK", Source::Model)];
        let out = reconstruct_spans(&s, &t, &Gazetteer::default(), &PostConfig::default());
        assert_eq!(out, s);
    }

    #[test]
    fn shape_extension_only_for_name_like() {
        let t = toks(&["gặp", "Pham", "Minh", "Chinh", "hôm", "nay"]);
        let cfg = PostConfig::default();
        let out = reconstruct_spans(&[span(1, 2, "PERSON", Source::Model)], &t, &Gazetteer::default(), &cfg);
        assert_eq!(keys(&out), [(1, 4, "PERSON")]);
        let out = reconstruct_spans(&[span(1, 2, "DATE", Source::Model)], &t, &Gazetteer::default(), &cfg);
        assert_eq!(keys(&out), [(1, 2, "DATE")]);
    }

    #[test]
    fn gazetteer_annotates_untouched_forms() {
        let t = toks(&["Ngân", "hàng", "Ngoại", "thương", "(", "Vietcombank", ")", "thông", "báo"]);
        let g = Gazetteer::parse("BANK\tVietcombank\n", false).unwrap();
        let out = reconstruct_spans(&[], &t, &g, &PostConfig::default());
        assert_eq!(keys(&out), [(5, 6, "BANK")]);
        let off = PostConfig {
            annotate_gazetteer: false,
            ..PostConfig::default()
        };
        assert!(reconstruct_spans(&[], &t, &g, &off).is_empty());
    }

    #[test]
    fn merge_examples() {
        let out = merge_overlaps(&[span(0, 1, "BANK", Source::Model), span(0, 2, "BANK", Source::Model)]);
        assert_eq!(keys(&out), [(0, 2, "BANK")]);
        assert!(merge_overlaps(&[]).is_empty());
        let out = merge_overlaps(&[span(0, 2, "BANK", Source::Rule), span(1, 3, "ORG", Source::Model)]);
        assert_eq!(keys(&out), [(0, 2, "BANK")]);
        // same label, same length: leftmost
        let out = merge_overlaps(&[span(1, 3, "A", Source::Rule), span(0, 2, "A", Source::Model)]);
        assert_eq!(keys(&out), [(0, 2, "A")]);
    }

    #[test]
    fn split_examples() {
        let t = toks(&["Agribank", ",", "VietinBank", ",", "BIDV"]);
        let cfg = SplitConfig::default();
        let out = split_lists(&[span(0, 5, "BANK", Source::Model)], &t, &cfg);
        assert_eq!(keys(&out), [(0, 1, "BANK"), (2, 3, "BANK"), (4, 5, "BANK")]);
        let t2 = toks(&["A", ",", ",", "B"]);
        let out = split_lists(&[span(0, 4, "X", Source::Model)], &t2, &cfg);
        assert_eq!(keys(&out), [(0, 1, "X"), (3, 4, "X")]);
        let plain = [span(0, 1, "X", Source::Model)];
        assert_eq!(split_lists(&plain, &t2, &cfg), plain);
        // rule spans and exempt labels stay whole
        let keep = [span(0, 5, "BANK", Source::Rule)];
        assert_eq!(split_lists(&keep, &t, &cfg), keep);
        let addr = [span(0, 5, "ADDRESS", Source::Model)];
        assert_eq!(split_lists(&addr, &t, &cfg), addr);
    }

    fn garment() -> LabelSchema {
        LabelSchema::from_toml_str(
            r#"
version = "g"
labels = ["v1", "v2", "v3", "BANK"]
[[groups]]
id = "body_measurement"
members = ["v1", "v2", "v3"]
default = "v1"
window = 3
[groups.cues]
v1 = ["chest"]
v2 = ["waist"]
v3 = ["hip"]
"#,
        )
        .unwrap()
    }

    #[test]
    fn restore_examples() {
        let s = garment();
        let t = toks(&["waist", "is", "80", "cm"]);
        let out = restore_fine_labels(&[span(2, 3, "body_measurement", Source::Model)], &t, &s);
        assert_eq!(out[0].label, "v2");
        let t = toks(&["size", "is", "80", "cm"]);
        let out = restore_fine_labels(&[span(2, 3, "body_measurement", Source::Model)], &t, &s);
        assert_eq!(out[0].label, "v1");
        // chest three before, hip one after
        let t = toks(&["chest", "x", "y", "80", "hip"]);
        let out = restore_fine_labels(&[span(3, 4, "body_measurement", Source::Model)], &t, &s);
        assert_eq!(out[0].label, "v3");
        // equal distance: preceding side wins
        let t = toks(&["Hip", "80", "waist"]);
        let out = restore_fine_labels(&[span(1, 2, "body_measurement", Source::Model)], &t, &s);
        assert_eq!(out[0].label, "v3");
        let b = [span(0, 1, "BANK", Source::Model)];
        assert_eq!(restore_fine_labels(&b, &t, &s), b);
    }

    #[test]
    fn full_stage_fixtures() {
        let s = garment();
        let t = toks(&["3", "nhà", "băng", "là", "Agribank", ",", "VietinBank", ",", "BIDV", "và", "SJC"]);
        let out = postprocess_all(
            &[span(4, 9, "BANK", Source::Model)],
            &t,
            &s,
            &Gazetteer::default(),
            &PostConfig::default(),
        );
        assert_eq!(keys(&out), [(4, 5, "BANK"), (6, 7, "BANK"), (8, 9, "BANK")]);

        let t = toks(&["5", "apartments", "in", "the", "Avalon", "building", ",", "District", "1"]);
        let g = Gazetteer::parse("ADDRESS\tAvalon building, District 1\n", false).unwrap();
        let out = postprocess_all(&[span(4, 6, "ADDRESS", Source::Model)], &t, &s, &g, &PostConfig::default());
        assert_eq!(keys(&out), [(4, 9, "ADDRESS")]);
    }
}
