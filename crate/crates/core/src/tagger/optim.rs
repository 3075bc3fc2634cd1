use std::collections::BTreeMap;

use super::features::FeatureVector;
use super::model::TaggerModel;
use crate::error::{Error, Result};

/// Gradient rows keyed by feature index; each row has one entry per class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseGrad {
    pub rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseGrad {
    pub fn get(&self, class: usize, feature: usize) -> f64 {
        self.rows.get(&feature).map_or(0.0, |r| r[class])
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flatten().all(|g| g.is_finite())
    }
}

/// Mean cross-entropy `-log p(gold)` over the batch, optionally weighted per
/// gold class (the mean then divides by the total weight).
pub fn loss_and_grad_weighted(
    model: &TaggerModel,
    batch: &[(FeatureVector, usize)],
    class_weights: Option<&[f64]>,
) -> (f64, SparseGrad) {
    let k = model.k();
    let mut grad = SparseGrad::default();
    if batch.is_empty() {
        return (0.0, grad);
    }
    let weight = |c: usize| class_weights.map_or(1.0, |w| w[c]);
    let total: f64 = batch.iter().map(|(_, y)| weight(*y)).sum();
    let mut loss = 0.0;
    for (fv, y) in batch {
        let a = weight(*y) / total;
        let mut p = model.predict_distribution(fv);
        loss -= a * p[*y].ln();
        p[*y] -= 1.0;
        for (f, v) in fv.iter() {
            let row = grad.rows.entry(f).or_insert_with(|| vec![0.0; k]);
            for (g, pc) in row.iter_mut().zip(&p) {
                *g += a * v * pc;
            }
        }
    }
    (loss, grad)
}

pub fn loss_and_grad(model: &TaggerModel, batch: &[(FeatureVector, usize)]) -> (f64, SparseGrad) {
    loss_and_grad_weighted(model, batch, None)
}

pub fn loss(model: &TaggerModel, batch: &[(FeatureVector, usize)]) -> f64 {
    let mut l = 0.0;
    for (fv, y) in batch {
        l -= model.predict_distribution(fv)[*y].ln();
    }
    l / batch.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    // feature rows whose moments may be nonzero
    live: Vec<bool>,
    live_rows: Vec<usize>,
}

impl AdamState {
    pub fn new(model: &TaggerModel, lr: f64) -> Self {
        Self::with_betas(model, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(model: &TaggerModel, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0);
        let n = model.dim * model.k();
        Self {
            lr,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            live: vec![false; model.dim],
            live_rows: Vec::new(),
        }
    }

    pub fn m(&self, class: usize, feature: usize, k: usize) -> f64 {
        self.m[feature * k + class]
    }

    pub fn v(&self, class: usize, feature: usize, k: usize) -> f64 {
        self.v[feature * k + class]
    }

    /// One bias-corrected Adam update over every parameter. Rows that have
    /// never seen a gradient have zero moments and are skipped, which leaves
    /// them exactly where a dense update would.
    pub fn step(&mut self, model: &mut TaggerModel, grad: &SparseGrad) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
        for &f in grad.rows.keys() {
            if !self.live[f] {
                self.live[f] = true;
                self.live_rows.push(f);
            }
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let k = model.k();
        let w = model.weights_mut();
        for &f in &self.live_rows {
            let g = grad.rows.get(&f);
            for c in 0..k {
                let i = f * k + c;
                let gi = g.map_or(0.0, |r| r[c]);
                self.m[i] = b1 * self.m[i] + (1.0 - b1) * gi;
                self.v[i] = b2 * self.v[i] + (1.0 - b2) * gi * gi;
                let mh = self.m[i] / c1;
                let vh = self.v[i] / c2;
                w[i] -= self.lr * mh / (vh.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, model: &mut TaggerModel, grad: &SparseGrad) -> Result<()> {
    state.step(model, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ClassIndex;

    fn model(labels: usize, dim: usize) -> TaggerModel {
        let l = (0..labels).map(|i| format!("L{i}")).collect();
        TaggerModel::zeros(ClassIndex::new(l, "t".into()), dim, 0)
    }

    #[test]
    fn uniform_loss_is_ln_k() {
        let m = model(2, 10);
        let batch = vec![(FeatureVector::new(vec![(1, 1.0)]), 3)];
        let (l, _) = loss_and_grad(&m, &batch);
        assert!((l - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_loss() {
        let mut m = model(1, 4);
        m.set_weight(2, 0, 800.0);
        let batch = vec![(FeatureVector::new(vec![(0, 1.0)]), 2)];
        let (l, g) = loss_and_grad(&m, &batch);
        assert_eq!(l, 0.0);
        assert!(g.rows.values().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn single_adam_step_by_hand() {
        let mut m = model(0, 1);
        let mut s = AdamState::new(&m, 0.1);
        let mut g = SparseGrad::default();
        g.rows.insert(0, vec![1.0]);
        s.step(&mut m, &g).unwrap();
        // m̂ = 1, v̂ = 1
        assert_eq!(m.weight(0, 0), -0.1 / (1.0 + 1e-8));
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_grad_leaves_fresh_weights() {
        let mut m = model(1, 8);
        let before = m.clone();
        let mut s = AdamState::new(&m, 0.1);
        s.step(&mut m, &SparseGrad::default()).unwrap();
        assert_eq!(m, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = model(1, 2);
        let mut s = AdamState::new(&m, 0.1);
        let mut g = SparseGrad::default();
        g.rows.insert(1, vec![0.0, f64::NAN, 0.0]);
        assert!(matches!(s.step(&mut m, &g), Err(Error::NonFiniteGradient)));
        assert_eq!(s.t, 0);
    }

    #[test]
    fn lazy_rows_match_dense_update() {
        // a row that got a gradient once keeps moving on later zero-grad steps
        let mut m = model(0, 2);
        let mut s = AdamState::new(&m, 0.1);
        let mut g = SparseGrad::default();
        g.rows.insert(0, vec![0.5]);
        s.step(&mut m, &g).unwrap();
        s.step(&mut m, &SparseGrad::default()).unwrap();
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (m1, v1) = ((1.0 - b1) * 0.5, (1.0 - b2) * 0.25);
        let w1 = -lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let (m2, v2) = (b1 * m1, b2 * v1);
        let w2 = w1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert_eq!(m.weight(0, 0), w2);
        assert_eq!(m.weight(0, 1), 0.0);
    }
}
