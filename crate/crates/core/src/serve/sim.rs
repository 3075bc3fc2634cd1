//! Deterministic batching simulator on a virtual microsecond clock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::batching::{form_batches, next_deadline, BatchPolicy, QueueItem};
use super::metrics::percentile;

/// Service time of a batch: `fixed_us + per_slot_us × batch size × longest item`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceModel {
    pub fixed_us: u64,
    pub per_slot_us: f64,
}

impl ServiceModel {
    pub fn cost_us(&self, slots: usize) -> u64 {
        self.fixed_us + (self.per_slot_us * slots as f64).round() as u64
    }
}

impl Default for ServiceModel {
    fn default() -> Self {
        Self {
            fixed_us: 500,
            per_slot_us: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBatch {
    pub worker: usize,
    pub dispatch_us: u64,
    pub finish_us: u64,
    pub items: Vec<QueueItem>,
    pub padding_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub batches: Vec<SimBatch>,
    pub mean_padding_ratio: f64,
    pub mean_latency_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_wait_ms: f64,
    pub makespan_ms: f64,
}

/// `n` requests with Poisson arrivals at `rate_per_s`, lengths exactly 10 or
/// 100 with equal probability.
pub fn bimodal_workload(n: usize, rate_per_s: f64, seed: u64) -> Vec<QueueItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(rate_per_s / 1e6).expect("positive rate");
    let mut t = 0.0;
    (0..n)
        .map(|i| {
            t += gap.sample(&mut rng);
            QueueItem {
                id: i as u64,
                arrival_us: t.round() as u64,
                len: if rng.gen_bool(0.5) { 10 } else { 100 },
            }
        })
        .collect()
}

/// Runs `workload` through `workers` identical workers. Whenever a worker is
/// free the batcher is asked for ready batches; the clock advances to the
/// next arrival, completion or deadline.
pub fn simulate(workload: &[QueueItem], policy: &BatchPolicy, workers: usize, service: ServiceModel) -> SimReport {
    assert!(workers > 0);
    let mut arrivals = workload.to_vec();
    arrivals.sort_by_key(|i| (i.arrival_us, i.id));
    let mut next = 0;
    let mut queue: Vec<QueueItem> = Vec::new();
    let mut busy_until = vec![0u64; workers];
    let mut batches = Vec::new();
    let mut now = 0u64;
    loop {
        while next < arrivals.len() && arrivals[next].arrival_us <= now {
            queue.push(arrivals[next]);
            next += 1;
        }
        while let Some(w) = (0..workers).find(|&w| busy_until[w] <= now) {
            let Some(b) = form_batches(&queue, policy, now).into_iter().next() else { break };
            queue.retain(|q| !b.items.iter().any(|i| i.id == q.id));
            let finish = now + service.cost_us(b.slots());
            busy_until[w] = finish;
            batches.push(SimBatch {
                worker: w,
                dispatch_us: now,
                finish_us: finish,
                padding_ratio: b.padding_ratio(),
                items: b.items,
            });
        }
        if next == arrivals.len() && queue.is_empty() {
            break;
        }
        let mut cands: Vec<u64> = busy_until.iter().copied().filter(|&t| t > now).collect();
        if next < arrivals.len() {
            cands.push(arrivals[next].arrival_us);
        }
        // an already-passed deadline is served at the next completion
        if let Some(d) = next_deadline(&queue, policy).filter(|&d| d > now) {
            cands.push(d);
        }
        now = cands.into_iter().min().expect("pending work has a next event");
    }
    report(batches)
}

fn report(batches: Vec<SimBatch>) -> SimReport {
    let mut lat: Vec<f64> = Vec::new();
    let mut max_wait = 0.0f64;
    for b in &batches {
        for i in &b.items {
            lat.push((b.finish_us - i.arrival_us) as f64 / 1e3);
            max_wait = max_wait.max((b.dispatch_us - i.arrival_us) as f64 / 1e3);
        }
    }
    lat.sort_by(f64::total_cmp);
    let n = batches.len().max(1) as f64;
    SimReport {
        mean_padding_ratio: batches.iter().map(|b| b.padding_ratio).sum::<f64>() / n,
        mean_latency_ms: if lat.is_empty() { 0.0 } else { lat.iter().sum::<f64>() / lat.len() as f64 },
        p50_ms: percentile(&lat, 50.0),
        p95_ms: percentile(&lat, 95.0),
        p99_ms: percentile(&lat, 99.0),
        max_wait_ms: max_wait,
        makespan_ms: batches.iter().map(|b| b.finish_us).max().unwrap_or(0) as f64 / 1e3,
        batches,
    }
}

/// Items that waited past `max_wait` although some worker sat idle at a
/// moment after their deadline and before their dispatch.
pub fn idle_wait_violations(rep: &SimReport, policy: &BatchPolicy, workers: usize) -> Vec<u64> {
    let mut by_worker: Vec<Vec<(u64, u64)>> = vec![Vec::new(); workers];
    for b in &rep.batches {
        by_worker[b.worker].push((b.dispatch_us, b.finish_us));
    }
    let idle_at = |w: usize, t: u64| !by_worker[w].iter().any(|&(s, e)| s <= t && t < e);
    let mut out = Vec::new();
    for b in &rep.batches {
        for i in &b.items {
            let deadline = i.arrival_us + policy.max_wait_us();
            if b.dispatch_us <= deadline {
                continue;
            }
            // idle stretches start at the deadline itself or at a completion
            let violated = (0..workers).any(|w| {
                idle_at(w, deadline)
                    || by_worker[w]
                        .iter()
                        .any(|&(_, e)| e >= deadline && e < b.dispatch_us && idle_at(w, e))
            });
            if violated {
                out.push(i.id);
            }
        }
    }
    out
}
