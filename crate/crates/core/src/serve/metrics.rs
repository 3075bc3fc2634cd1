use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Nearest-rank percentile of an ascending slice; 0 when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServerMetrics {
    pub completed: u64,
    pub errors: u64,
    pub throughput_rps: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub mean_padding_ratio: f64,
    pub batches: u64,
    pub queue_depth: usize,
    pub rule_busy_fraction: f64,
    pub model_busy_fraction: f64,
    pub uptime_s: f64,
}

const WINDOW: usize = 4096;

/// Shared counters updated by the server threads.
pub struct Metrics {
    start: Instant,
    pub(crate) completed: AtomicU64,
    pub(crate) errors: AtomicU64,
    pub(crate) batches: AtomicU64,
    pub(crate) queue_depth: AtomicUsize,
    rule_busy_us: AtomicU64,
    model_busy_us: AtomicU64,
    rule_workers: usize,
    model_workers: usize,
    latencies: Mutex<VecDeque<f64>>,
    padding: Mutex<(f64, u64)>,
}

impl Metrics {
    pub fn new(rule_workers: usize, model_workers: usize) -> Self {
        Self {
            start: Instant::now(),
            completed: AtomicU64::new(0),
            errors: AtomicU64::new(0),
            batches: AtomicU64::new(0),
            queue_depth: AtomicUsize::new(0),
            rule_busy_us: AtomicU64::new(0),
            model_busy_us: AtomicU64::new(0),
            rule_workers,
            model_workers,
            latencies: Mutex::new(VecDeque::with_capacity(WINDOW)),
            padding: Mutex::new((0.0, 0)),
        }
    }

    pub fn record_latency(&self, ms: f64) {
        self.completed.fetch_add(1, Ordering::Relaxed);
        let mut l = self.latencies.lock().expect("metrics lock");
        if l.len() == WINDOW {
            l.pop_front();
        }
        l.push_back(ms);
    }

    pub fn record_error(&self) {
        self.errors.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_batch(&self, padding_ratio: f64) {
        self.batches.fetch_add(1, Ordering::Relaxed);
        let mut p = self.padding.lock().expect("metrics lock");
        p.0 += padding_ratio;
        p.1 += 1;
    }

    pub fn add_rule_busy(&self, us: u64) {
        self.rule_busy_us.fetch_add(us, Ordering::Relaxed);
    }

    pub fn add_model_busy(&self, us: u64) {
        self.model_busy_us.fetch_add(us, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> ServerMetrics {
        let up = self.start.elapsed().as_secs_f64().max(1e-9);
        let mut lat: Vec<f64> = self.latencies.lock().expect("metrics lock").iter().copied().collect();
        lat.sort_by(f64::total_cmp);
        let (pad_sum, pad_n) = *self.padding.lock().expect("metrics lock");
        let frac = |busy: &AtomicU64, n: usize| busy.load(Ordering::Relaxed) as f64 / 1e6 / (up * n.max(1) as f64);
        let completed = self.completed.load(Ordering::Relaxed);
        ServerMetrics {
            completed,
            errors: self.errors.load(Ordering::Relaxed),
            throughput_rps: completed as f64 / up,
            p50_ms: percentile(&lat, 50.0),
            p95_ms: percentile(&lat, 95.0),
            p99_ms: percentile(&lat, 99.0),
            mean_padding_ratio: if pad_n == 0 { 0.0 } else { pad_sum / pad_n as f64 },
            batches: pad_n,
            queue_depth: self.queue_depth.load(Ordering::Relaxed),
            rule_busy_fraction: frac(&self.rule_busy_us, self.rule_workers),
            model_busy_fraction: frac(&self.model_busy_us, self.model_workers),
            uptime_s: up,
        }
    }
}
