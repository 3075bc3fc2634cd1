//! Compares the analytic gradient with central differences on random
//! weights and sparse features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_ner::schema::ClassIndex;
use hybrid_ner::tagger::{loss, loss_and_grad, FeatureVector, TaggerModel};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ci = ClassIndex::new(vec!["BANK".into(), "PERSON".into()], "demo".into());
    let dim = 32;
    let mut m = TaggerModel::zeros(ci, dim, 0);
    for c in 0..m.k() {
        for f in 0..dim {
            m.set_weight(c, f, rng.gen_range(-1.0..1.0));
        }
    }
    let batch: Vec<(FeatureVector, usize)> = (0..8)
        .map(|_| {
            let fv = FeatureVector::new((0..4).map(|_| (rng.gen_range(0..dim as u32), rng.gen_range(-1.0..1.0))).collect());
            (fv, rng.gen_range(0..m.k()))
        })
        .collect();
    let (_, grad) = loss_and_grad(&m, &batch);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (fv, _) = &batch[rng.gen_range(0..batch.len())];
        let (f, _) = fv.iter().nth(rng.gen_range(0..fv.len())).unwrap();
        let c = rng.gen_range(0..m.k());
        let w = m.weight(c, f);
        m.set_weight(c, f, w + h);
        let up = loss(&m, &batch);
        m.set_weight(c, f, w - h);
        let down = loss(&m, &batch);
        m.set_weight(c, f, w);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.get(c, f);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8));
    }
    println!("100 coordinates, max relative error {worst:.2e}");
}
