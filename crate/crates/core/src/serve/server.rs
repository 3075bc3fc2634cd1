//! Line-delimited TCP front end with separate rule and model worker pools.
//!
//! Request `{"id": .., "text": ".."}` → response `{"id", "spans", "timings"}`
//! or `{"id", "error"}`. `{"verb": "metrics"}` returns a metrics snapshot;
//! `{"verb": "shutdown"}` starts a graceful drain.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{select, unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::batching::{form_batches, next_deadline, BatchPolicy, QueueItem};
use super::metrics::{Metrics, ServerMetrics};
use crate::corpus::{DefaultTokenizer, EntitySpan, TokenSequence, Tokenizer};
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, SpanView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub policy: BatchPolicy,
    pub rule_workers: usize,
    pub model_workers: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            policy: BatchPolicy::default(),
            rule_workers: 2,
            model_workers: 2,
        }
    }
}

/// Per-request timings reported in responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseTimings {
    pub queue_ms: f64,
    pub rule_ms: f64,
    pub model_ms: f64,
    pub post_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Value,
    pub spans: Vec<SpanView>,
    pub timings: ResponseTimings,
}

struct Job {
    key: u64,
    conn: u64,
    id: Value,
    raw: String,
    tokens: TokenSequence,
    arrival: Instant,
}

enum Intake {
    Request(Arc<Job>),
    Drain,
    Stop,
}

enum RuleTask {
    Extract(Arc<Job>),
    Post(u64),
    Stop,
}

enum ModelTask {
    Batch(Vec<Arc<Job>>, Instant),
    Stop,
}

enum WriterMsg {
    Register(u64, TcpStream),
    Line(u64, String),
    Stop,
}

#[derive(Default)]
struct Slot {
    job: Option<Arc<Job>>,
    queue_ms: f64,
    rule: Option<(Vec<EntitySpan>, f64)>,
    model: Option<std::result::Result<(Vec<EntitySpan>, f64), String>>,
}

struct Shared {
    pipeline: Pipeline,
    metrics: Metrics,
    slots: Mutex<HashMap<u64, Slot>>,
    inflight: AtomicUsize,
    draining: AtomicBool,
    stop_requested: AtomicBool,
    next_key: AtomicU64,
    start: Instant,
    rule_tx: Sender<RuleTask>,
    writer_tx: Sender<WriterMsg>,
}

impl Shared {
    fn since_start_us(&self, t: Instant) -> u64 {
        t.duration_since(self.start).as_micros() as u64
    }

    /// Fills one half of a slot; the second half to arrive schedules
    /// post-processing on the rule pool.
    fn complete(&self, key: u64, f: impl FnOnce(&mut Slot)) {
        let ready = {
            let mut slots = self.slots.lock().expect("slot lock");
            let s = slots.entry(key).or_default();
            f(s);
            s.rule.is_some() && s.model.is_some()
        };
        if ready {
            let _ = self.rule_tx.send(RuleTask::Post(key));
        }
    }

    fn respond(&self, conn: u64, line: String) {
        let _ = self.writer_tx.send(WriterMsg::Line(conn, line));
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    intake_tx: Sender<Intake>,
    model_tx: Sender<ModelTask>,
    threads: Vec<JoinHandle<()>>,
    workers: (usize, usize),
}

/// Binds `addr` and starts serving `pipeline`.
pub fn serve(pipeline: Pipeline, cfg: &ServerConfig, addr: &str) -> Result<ServerHandle> {
    cfg.policy.validate()?;
    if cfg.rule_workers == 0 || cfg.model_workers == 0 {
        return Err(Error::Config("worker pools need at least one thread each".into()));
    }
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;

    let (intake_tx, intake_rx) = unbounded::<Intake>();
    let (rule_tx, rule_rx) = unbounded::<RuleTask>();
    let (model_tx, model_rx) = unbounded::<ModelTask>();
    let (done_tx, done_rx) = unbounded::<()>();
    let (writer_tx, writer_rx) = unbounded::<WriterMsg>();

    let shared = Arc::new(Shared {
        pipeline,
        metrics: Metrics::new(cfg.rule_workers, cfg.model_workers),
        slots: Mutex::new(HashMap::new()),
        inflight: AtomicUsize::new(0),
        draining: AtomicBool::new(false),
        stop_requested: AtomicBool::new(false),
        next_key: AtomicU64::new(0),
        start: Instant::now(),
        rule_tx,
        writer_tx,
    });

    let mut threads = Vec::new();
    threads.push(spawn_named("hner-writer", {
        let shared = shared.clone();
        move || writer_loop(writer_rx, &shared)
    }));
    for i in 0..cfg.rule_workers {
        let (shared, rx) = (shared.clone(), rule_rx.clone());
        threads.push(spawn_named(&format!("hner-rule-{i}"), move || rule_loop(rx, &shared)));
    }
    for i in 0..cfg.model_workers {
        let (shared, rx, done) = (shared.clone(), model_rx.clone(), done_tx.clone());
        threads.push(spawn_named(&format!("hner-model-{i}"), move || model_loop(rx, done, &shared)));
    }
    threads.push(spawn_named("hner-scheduler", {
        let (shared, policy, mtx, workers) = (shared.clone(), cfg.policy.clone(), model_tx.clone(), cfg.model_workers);
        move || scheduler_loop(intake_rx, done_rx, mtx, policy, workers, &shared)
    }));
    threads.push(spawn_named("hner-accept", {
        let (shared, itx) = (shared.clone(), intake_tx.clone());
        move || accept_loop(listener, itx, &shared)
    }));
    log::info!("serving on {local}");
    Ok(ServerHandle {
        addr: local,
        shared,
        intake_tx,
        model_tx,
        threads,
        workers: (cfg.rule_workers, cfg.model_workers),
    })
}

fn spawn_named(name: &str, f: impl FnOnce() + Send + 'static) -> JoinHandle<()> {
    thread::Builder::new().name(name.into()).spawn(f).expect("spawn thread")
}

fn accept_loop(listener: TcpListener, intake: Sender<Intake>, shared: &Arc<Shared>) {
    let mut next_conn = 0u64;
    while !shared.draining.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                next_conn += 1;
                let conn = next_conn;
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                let Ok(w) = stream.try_clone() else { continue };
                let _ = shared.writer_tx.send(WriterMsg::Register(conn, w));
                let (shared, intake) = (shared.clone(), intake.clone());
                spawn_named(&format!("hner-conn-{conn}"), move || read_loop(conn, stream, intake, &shared));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(5));
            }
        }
    }
}

#[derive(Deserialize)]
struct RequestLine {
    id: Value,
    text: String,
}

fn read_loop(conn: u64, stream: TcpStream, intake: Sender<Intake>, shared: &Arc<Shared>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let v: std::result::Result<Value, _> = serde_json::from_str(&line);
        if let Ok(Value::Object(m)) = &v {
            match m.get("verb").and_then(Value::as_str) {
                Some("metrics") => {
                    let snap = json!({ "metrics": shared.metrics.snapshot() });
                    shared.respond(conn, snap.to_string());
                    continue;
                }
                Some("shutdown") => {
                    shared.draining.store(true, Ordering::SeqCst);
                    shared.stop_requested.store(true, Ordering::SeqCst);
                    shared.respond(conn, json!({"ok": "draining"}).to_string());
                    continue;
                }
                _ => {}
            }
        }
        // counted before the drain check so a drain waits for it
        shared.inflight.fetch_add(1, Ordering::SeqCst);
        let parsed = v
            .map_err(|e| e.to_string())
            .and_then(|v| serde_json::from_value::<RequestLine>(v).map_err(|e| e.to_string()));
        let req = match parsed {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line).ok().and_then(|v| v.get("id").cloned());
                error_reply(shared, conn, id.unwrap_or(Value::Null), &format!("malformed request: {e}"));
                continue;
            }
        };
        if shared.draining.load(Ordering::SeqCst) {
            error_reply(shared, conn, req.id, "server is shutting down");
            continue;
        }
        let tokens = DefaultTokenizer.tokenize(&req.text);
        let job = Arc::new(Job {
            key: shared.next_key.fetch_add(1, Ordering::SeqCst),
            conn,
            id: req.id,
            raw: req.text,
            tokens,
            arrival: Instant::now(),
        });
        if intake.send(Intake::Request(job.clone())).is_err() {
            error_reply(shared, conn, job.id.clone(), "server is shutting down");
        }
    }
}

fn error_reply(shared: &Shared, conn: u64, id: Value, msg: &str) {
    shared.metrics.record_error();
    shared.respond(conn, json!({"id": id, "error": msg}).to_string());
    shared.inflight.fetch_sub(1, Ordering::SeqCst);
}

fn scheduler_loop(
    intake: Receiver<Intake>,
    done: Receiver<()>,
    model_tx: Sender<ModelTask>,
    policy: BatchPolicy,
    workers: usize,
    shared: &Arc<Shared>,
) {
    let mut queue: Vec<QueueItem> = Vec::new();
    let mut jobs: HashMap<u64, Arc<Job>> = HashMap::new();
    let mut free = workers;
    let mut draining = false;
    loop {
        let now_us = shared.since_start_us(Instant::now());
        let wait = match next_deadline(&queue, &policy) {
            Some(d) if free > 0 => Duration::from_micros(d.saturating_sub(now_us)),
            _ => Duration::from_millis(50),
        };
        select! {
            recv(intake) -> m => match m {
                Ok(Intake::Request(job)) => {
                    queue.push(QueueItem { id: job.key, arrival_us: shared.since_start_us(job.arrival), len: job.tokens.len() });
                    shared.metrics.queue_depth.store(queue.len(), Ordering::Relaxed);
                    let _ = shared.rule_tx.send(RuleTask::Extract(job.clone()));
                    jobs.insert(job.key, job);
                }
                Ok(Intake::Drain) => draining = true,
                Ok(Intake::Stop) | Err(_) => return,
            },
            recv(done) -> _ => free += 1,
            default(wait) => {},
        }
        while free > 0 {
            // while draining every partial batch counts as overdue
            let now = if draining { u64::MAX / 2 } else { shared.since_start_us(Instant::now()) };
            let Some(b) = form_batches(&queue, &policy, now).into_iter().next() else { break };
            queue.retain(|q| !b.items.iter().any(|i| i.id == q.id));
            shared.metrics.queue_depth.store(queue.len(), Ordering::Relaxed);
            shared.metrics.record_batch(b.padding_ratio());
            let batch: Vec<Arc<Job>> = b.items.iter().map(|i| jobs.remove(&i.id).expect("queued job")).collect();
            free -= 1;
            let _ = model_tx.send(ModelTask::Batch(batch, Instant::now()));
        }
    }
}

fn model_loop(rx: Receiver<ModelTask>, done: Sender<()>, shared: &Arc<Shared>) {
    while let Ok(ModelTask::Batch(batch, dispatched)) = rx.recv() {
        let t0 = Instant::now();
        for job in batch {
            let t = Instant::now();
            let res = shared.pipeline.model_stream(&job.tokens);
            let ms = t.elapsed().as_secs_f64() * 1e3;
            let queue_ms = dispatched.duration_since(job.arrival).as_secs_f64() * 1e3;
            shared.complete(job.key, |s| {
                s.queue_ms = queue_ms;
                s.model = Some(res.map(|v| (v, ms)).map_err(|e| e.to_string()));
            });
        }
        shared.metrics.add_model_busy(t0.elapsed().as_micros() as u64);
        let _ = done.send(());
    }
}

fn rule_loop(rx: Receiver<RuleTask>, shared: &Arc<Shared>) {
    while let Ok(task) = rx.recv() {
        let t0 = Instant::now();
        match task {
            RuleTask::Stop => break,
            RuleTask::Extract(job) => {
                let spans = shared.pipeline.rule_stream(&job.tokens);
                let ms = t0.elapsed().as_secs_f64() * 1e3;
                let key = job.key;
                shared.complete(key, |s| {
                    s.job = Some(job);
                    s.rule = Some((spans, ms));
                });
            }
            RuleTask::Post(key) => {
                let slot = shared.slots.lock().expect("slot lock").remove(&key).expect("slot present");
                let job = slot.job.expect("rule half sets the job");
                let (rule_spans, rule_ms) = slot.rule.expect("rule half");
                let line = match slot.model.expect("model half") {
                    Err(e) => {
                        shared.metrics.record_error();
                        json!({"id": job.id, "error": e}).to_string()
                    }
                    Ok((model_spans, model_ms)) => {
                        let spans = shared.pipeline.finish(&job.tokens, &rule_spans, &model_spans);
                        let resp = Response {
                            id: job.id.clone(),
                            spans: spans.iter().map(|s| SpanView::new(s, &job.tokens, &job.raw)).collect(),
                            timings: ResponseTimings {
                                queue_ms: slot.queue_ms,
                                rule_ms,
                                model_ms,
                                post_ms: t0.elapsed().as_secs_f64() * 1e3,
                            },
                        };
                        shared.metrics.record_latency(job.arrival.elapsed().as_secs_f64() * 1e3);
                        serde_json::to_string(&resp).expect("response serializes")
                    }
                };
                shared.respond(job.conn, line);
                shared.inflight.fetch_sub(1, Ordering::SeqCst);
            }
        }
        shared.metrics.add_rule_busy(t0.elapsed().as_micros() as u64);
    }
}

fn writer_loop(rx: Receiver<WriterMsg>, _shared: &Arc<Shared>) {
    let mut conns: HashMap<u64, TcpStream> = HashMap::new();
    while let Ok(m) = rx.recv() {
        match m {
            WriterMsg::Register(c, s) => {
                conns.insert(c, s);
            }
            WriterMsg::Line(c, mut line) => {
                if let Some(s) = conns.get_mut(&c) {
                    line.push('\n');
                    if s.write_all(line.as_bytes()).and_then(|_| s.flush()).is_err() {
                        conns.remove(&c);
                    }
                }
            }
            WriterMsg::Stop => break,
        }
    }
    for s in conns.values() {
        let _ = s.shutdown(Shutdown::Both);
    }
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn metrics(&self) -> ServerMetrics {
        self.shared.metrics.snapshot()
    }

    /// True once a client sent the `shutdown` verb.
    pub fn stop_requested(&self) -> bool {
        self.shared.stop_requested.load(Ordering::SeqCst)
    }

    /// Blocks until a client asks for shutdown, then drains.
    pub fn wait(self) -> ServerMetrics {
        while !self.stop_requested() {
            thread::sleep(Duration::from_millis(20));
        }
        self.shutdown()
    }

    /// Stops accepting work, answers everything already accepted, then joins
    /// all threads. Returns the final metrics.
    pub fn shutdown(self) -> ServerMetrics {
        let s = &self.shared;
        s.draining.store(true, Ordering::SeqCst);
        let _ = self.intake_tx.send(Intake::Drain);
        while s.inflight.load(Ordering::SeqCst) > 0 {
            thread::sleep(Duration::from_millis(1));
        }
        let final_metrics = s.metrics.snapshot();
        let _ = self.intake_tx.send(Intake::Stop);
        for _ in 0..self.workers.0 {
            let _ = s.rule_tx.send(RuleTask::Stop);
        }
        for _ in 0..self.workers.1 {
            let _ = self.model_tx.send(ModelTask::Stop);
        }
        let _ = s.writer_tx.send(WriterMsg::Stop);
        for t in self.threads {
            let _ = t.join();
        }
        log::info!("server drained");
        final_metrics
    }
}
