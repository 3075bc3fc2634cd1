//! Seeded Poisson or burst client for the line server, with exactly-once
//! accounting of responses.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::metrics::percentile;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LoadgenConfig {
    pub target: String,
    /// Requests per second; `None` sends everything at once.
    pub rate: Option<f64>,
    pub requests: usize,
    pub seed: u64,
    pub texts: Vec<String>,
    /// How long to wait for stragglers after the last send.
    pub timeout: Duration,
    /// Ask the server to drain and exit once the run is over.
    pub shutdown_after: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub sent: usize,
    pub ok: usize,
    pub errors: usize,
    pub duplicates: usize,
    pub missing: usize,
    pub unknown: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub wall_s: f64,
    pub throughput_rps: f64,
}

impl LoadReport {
    pub fn exactly_once(&self) -> bool {
        self.duplicates == 0 && self.missing == 0 && self.unknown == 0 && self.ok + self.errors == self.sent
    }
}

/// Send offsets in microseconds: exponential gaps at `rate`, or all zero.
pub fn schedule(n: usize, rate: Option<f64>, seed: u64) -> Vec<u64> {
    let Some(rate) = rate.filter(|r| *r > 0.0) else {
        return vec![0; n];
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            t += exp.sample(&mut rng);
            (t * 1e6) as u64
        })
        .collect()
}

pub fn run_loadgen(cfg: &LoadgenConfig) -> Result<LoadReport> {
    if cfg.texts.is_empty() {
        return Err(Error::Config("loadgen needs at least one text".into()));
    }
    let stream = TcpStream::connect(&cfg.target)?;
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    let n = cfg.requests;

    let collector = thread::spawn(move || {
        let mut seen: Vec<(Value, Instant)> = Vec::new();
        for line in BufReader::new(reader).lines() {
            let Ok(line) = line else { break };
            let v: Value = serde_json::from_str(&line).unwrap_or(Value::Null);
            seen.push((v, Instant::now()));
            if seen.len() >= n {
                break;
            }
        }
        seen
    });

    let offsets = schedule(n, cfg.rate, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let mut sent_at = HashMap::with_capacity(n);
    let mut w = stream.try_clone()?;
    let t0 = Instant::now();
    for (i, off) in offsets.iter().enumerate() {
        let due = t0 + Duration::from_micros(*off);
        if let Some(d) = due.checked_duration_since(Instant::now()) {
            thread::sleep(d);
        }
        let id = format!("lg-{i}");
        let text = &cfg.texts[rng.gen_range(0..cfg.texts.len())];
        let line = json!({"id": id, "text": text}).to_string();
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        sent_at.insert(id, Instant::now());
    }
    w.flush()?;

    let deadline = Instant::now() + cfg.timeout;
    while !collector.is_finished() && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(5));
    }
    if !collector.is_finished() {
        // unblock the reader; whatever is still outstanding counts as missing
        let _ = stream.shutdown(std::net::Shutdown::Both);
    }
    if cfg.shutdown_after {
        let _ = w.write_all(b"{\"verb\":\"shutdown\"}\n");
    }
    let seen = collector.join().map_err(|_| Error::Config("collector thread panicked".into()))?;
    let wall = t0.elapsed().as_secs_f64();

    let mut rep = LoadReport { sent: n, wall_s: wall, ..Default::default() };
    let mut got: HashMap<String, usize> = HashMap::new();
    let mut lat = Vec::new();
    for (v, at) in &seen {
        let Some(id) = v.get("id").and_then(Value::as_str) else {
            rep.unknown += 1;
            continue;
        };
        let Some(sent) = sent_at.get(id) else {
            rep.unknown += 1;
            continue;
        };
        let c = got.entry(id.to_string()).or_default();
        *c += 1;
        if *c > 1 {
            rep.duplicates += 1;
            continue;
        }
        if v.get("error").is_some() {
            rep.errors += 1;
        } else {
            rep.ok += 1;
            lat.push(at.duration_since(*sent).as_secs_f64() * 1e3);
        }
    }
    rep.missing = sent_at.keys().filter(|k| !got.contains_key(*k)).count();
    lat.sort_by(f64::total_cmp);
    rep.p50_ms = percentile(&lat, 50.0);
    rep.p95_ms = percentile(&lat, 95.0);
    rep.p99_ms = percentile(&lat, 99.0);
    rep.throughput_rps = rep.ok as f64 / wall.max(1e-9);
    Ok(rep)
}
