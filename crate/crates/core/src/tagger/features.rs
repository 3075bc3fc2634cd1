//! Hashed sparse features for one token position.

use crate::corpus::TokenSequence;

/// Templates fired at every position, in hashing order.
pub const TEMPLATES: [&str; 17] = [
    "bias", "w-2", "w-1", "w0", "w+1", "w+2", "shape", "pre1", "pre2", "pre3", "suf1", "suf2",
    "suf3", "digit", "cap", "first", "last",
];

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

/// Sparse vector with unique, ascending indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Sums values of repeated indices.
    pub fn new(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        Self { entries: out }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|&(i, v)| (i as usize, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    pub dim: usize,
    pub seed: u64,
}

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapsed character classes: `Vietcombank` → `Xx`, `12/05` → `d/d`.
pub fn word_shape(w: &str) -> String {
    let mut out = String::new();
    for c in w.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

fn affix(chars: &[char], n: usize, front: bool) -> String {
    let n = n.min(chars.len());
    if front {
        chars[..n].iter().collect()
    } else {
        chars[chars.len() - n..].iter().collect()
    }
}

impl FeatureHasher {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0 && dim <= u32::MAX as usize, "dimension out of range");
        Self { dim, seed }
    }

    pub fn index(&self, template: usize, value: &str) -> u32 {
        let mut h = fnv1a(0xcbf2_9ce4_8422_2325, &self.seed.to_le_bytes());
        h = fnv1a(h, &[template as u8, 0xff]);
        h = fnv1a(h, value.as_bytes());
        (mix(h) % self.dim as u64) as u32
    }

    /// The raw template values at position `t`, aligned with [`TEMPLATES`].
    pub fn template_values(tokens: &TokenSequence, t: usize) -> [String; 17] {
        let n = tokens.len();
        let word = |o: isize| -> String {
            let i = t as isize + o;
            if i < 0 {
                BOS.into()
            } else if i as usize >= n {
                EOS.into()
            } else {
                tokens[i as usize].text.to_lowercase()
            }
        };
        let raw = &tokens[t].text;
        let lower: Vec<char> = raw.to_lowercase().chars().collect();
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        [
            String::new(),
            word(-2),
            word(-1),
            word(0),
            word(1),
            word(2),
            word_shape(raw),
            affix(&lower, 1, true),
            affix(&lower, 2, true),
            affix(&lower, 3, true),
            affix(&lower, 1, false),
            affix(&lower, 2, false),
            affix(&lower, 3, false),
            flag(raw.chars().all(char::is_numeric)),
            flag(raw.chars().next().is_some_and(char::is_uppercase)),
            flag(t == 0),
            flag(t + 1 == n),
        ]
    }

    pub fn extract(&self, tokens: &TokenSequence, t: usize) -> FeatureVector {
        assert!(t < tokens.len(), "position {t} out of range");
        let vals = Self::template_values(tokens, t);
        FeatureVector::new(
            vals.iter()
                .enumerate()
                .map(|(i, v)| (self.index(i, v), 1.0))
                .collect(),
        )
    }

    pub fn extract_all(&self, tokens: &TokenSequence) -> Vec<FeatureVector> {
        (0..tokens.len()).map(|t| self.extract(tokens, t)).collect()
    }
}

/// Free-function form of [`FeatureHasher::extract`].
pub fn extract_features(tokens: &TokenSequence, t: usize, dim: usize, seed: u64) -> FeatureVector {
    FeatureHasher::new(dim, seed).extract(tokens, t)
}
