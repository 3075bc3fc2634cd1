//! FIFO against length-bucketed batching on a bimodal workload, on the
//! virtual clock.

use hybrid_ner::serve::{bimodal_workload, idle_wait_violations, simulate, BatchPolicy, ServiceModel, Strategy};

fn main() {
    let workload = bimodal_workload(5000, 2000.0, 1);
    println!("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}", "strategy", "padding", "p50 ms", "p95 ms", "p99 ms", "batches");
    for strategy in [Strategy::Fifo, Strategy::LengthBucketed] {
        let policy = BatchPolicy { strategy, ..BatchPolicy::default() };
        let rep = simulate(&workload, &policy, 2, ServiceModel::default());
        assert!(idle_wait_violations(&rep, &policy, 2).is_empty());
        println!(
            "{:<16} {:>8.3} {:>8.2} {:>8.2} {:>8.2} {:>8}",
            format!("{strategy:?}"),
            rep.mean_padding_ratio,
            rep.p50_ms,
            rep.p95_ms,
            rep.p99_ms,
            rep.batches.len()
        );
    }
}
