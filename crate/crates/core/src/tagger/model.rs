use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureHasher, FeatureVector};
use crate::corpus::{TagSequence, TokenSequence};
use crate::error::{Error, Result};
use crate::schema::ClassIndex;

const MAGIC: &[u8; 8] = b"HNERLOG1";

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Log-linear per-token classifier over hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub dim: usize,
    pub hasher_seed: u64,
    pub class_index: ClassIndex,
    // feature-major: weights[f * k + c]
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    hasher_seed: u64,
    class_index: ClassIndex,
    rows: usize,
}

impl TaggerModel {
    pub fn zeros(class_index: ClassIndex, dim: usize, hasher_seed: u64) -> Self {
        let k = class_index.k();
        Self {
            dim,
            hasher_seed,
            class_index,
            weights: vec![0.0; dim * k],
        }
    }

    pub fn k(&self) -> usize {
        self.class_index.k()
    }

    pub fn hasher(&self) -> FeatureHasher {
        FeatureHasher::new(self.dim, self.hasher_seed)
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[feature * self.k() + class]
    }

    pub fn set_weight(&mut self, class: usize, feature: usize, w: f64) {
        let k = self.k();
        self.weights[feature * k + class] = w;
    }

    pub fn row(&self, feature: usize) -> &[f64] {
        let k = self.k();
        &self.weights[feature * k..(feature + 1) * k]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn scores(&self, fv: &FeatureVector) -> Vec<f64> {
        let mut s = vec![0.0; self.k()];
        for (f, v) in fv.iter() {
            for (sc, w) in s.iter_mut().zip(self.row(f)) {
                *sc += v * w;
            }
        }
        s
    }

    pub fn predict_distribution(&self, fv: &FeatureVector) -> Vec<f64> {
        softmax(&self.scores(fv))
    }

    /// Greedy per-token argmax, repaired to valid BIO, with the winning
    /// probability of each token.
    pub fn tag_scored(&self, tokens: &TokenSequence) -> (TagSequence, Vec<f64>) {
        let h = self.hasher();
        let mut tags = Vec::with_capacity(tokens.len());
        let mut conf = Vec::with_capacity(tokens.len());
        for t in 0..tokens.len() {
            let p = self.predict_distribution(&h.extract(tokens, t));
            let c = argmax(&p);
            tags.push(self.class_index.tag_of(c));
            conf.push(p[c]);
        }
        (TagSequence(tags).repaired(), conf)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let k = self.k();
        let rows: Vec<usize> = (0..self.dim)
            .filter(|&f| self.row(f).iter().any(|&x| x != 0.0))
            .collect();
        let header = serde_json::to_vec(&Header {
            dim: self.dim,
            hasher_seed: self.hasher_seed,
            class_index: self.class_index.clone(),
            rows: rows.len(),
        })?;
        let mut buf = Vec::with_capacity(16 + header.len() + rows.len() * (4 + 8 * k));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header);
        for f in rows {
            buf.extend_from_slice(&(f as u32).to_le_bytes());
            for x in self.row(f) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a model file"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
        if hlen > body.len() {
            return Err(bad("truncated header"));
        }
        let h: Header = serde_json::from_slice(&body[..hlen])
            .map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
        if h.dim == 0 || h.dim > u32::MAX as usize {
            return Err(bad("dimension out of range"));
        }
        let mut m = TaggerModel::zeros(h.class_index, h.dim, h.hasher_seed);
        let k = m.k();
        let row_len = 4 + 8 * k;
        let data = &body[hlen..];
        if data.len() != h.rows * row_len {
            return Err(bad("weight section has the wrong size"));
        }
        for chunk in data.chunks_exact(row_len) {
            let f = u32::from_le_bytes(chunk[..4].try_into().unwrap()) as usize;
            if f >= m.dim {
                return Err(bad("feature index out of range"));
            }
            for c in 0..k {
                let o = 4 + 8 * c;
                let x = f64::from_le_bytes(chunk[o..o + 8].try_into().unwrap());
                if !x.is_finite() {
                    return Err(bad("non-finite weight"));
                }
                m.set_weight(c, f, x);
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tag;

    fn index() -> ClassIndex {
        ClassIndex::new(vec!["BANK".into(), "PERSON".into()], "t".into())
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let m = TaggerModel::zeros(index(), 64, 0);
        let p = m.predict_distribution(&FeatureVector::new(vec![(3, 1.0)]));
        assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let p = softmax(&[1000.0, -1000.0, 999.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_tags_o() {
        let m = TaggerModel::zeros(index(), 64, 0);
        let (_, toks) = TokenSequence::from_words(&["a", "b", "c"]);
        let (tags, conf) = m.tag_scored(&toks);
        assert!(tags.iter().all(|t| *t == Tag::O));
        assert!(conf.iter().all(|&c| (c - 0.2).abs() < 1e-15));
        let (_, empty) = TokenSequence::from_words::<&str>(&[]);
        assert!(m.tag_scored(&empty).0.is_empty());
    }

    #[test]
    fn file_round_trip() {
        let mut m = TaggerModel::zeros(index(), 1000, 9);
        m.set_weight(3, 17, -0.5);
        m.set_weight(0, 999, 1e-300);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(TaggerModel::read_from(&buf[..]).unwrap(), m);
        assert!(TaggerModel::read_from(&buf[..buf.len() - 1]).is_err());
        assert!(TaggerModel::read_from(&b"garbage"[..]).is_err());
    }
}
