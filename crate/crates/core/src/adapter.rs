//! Line-delimited JSON request/response channel to an external process.
//!
//! Every request carries a string `id`; the matching response echoes it.
//! Responses to earlier requests (for example ones that timed out) are
//! skipped.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Where an adapter lives: `tcp://host:port` or `exec:program arg…`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Exec(Vec<String>),
}

impl std::str::FromStr for Endpoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if !argv.is_empty() {
                return Ok(Endpoint::Exec(argv));
            }
        }
        Err(Error::Config(format!(
            "adapter endpoint {s:?} must look like tcp://host:port or exec:program"
        )))
    }
}

struct Inner {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

pub struct LineChannel {
    inner: Mutex<Inner>,
    timeout: Duration,
    child: Option<Mutex<Child>>,
}

impl LineChannel {
    pub fn new(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
    ) -> Self {
        let (tx, rx) = crossbeam_channel::unbounded();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            inner: Mutex::new(Inner {
                writer: Box::new(writer),
                lines: rx,
                next_id: 0,
            }),
            timeout,
            child: None,
        }
    }

    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                Ok(Self::new(stream.try_clone()?, stream, timeout))
            }
            Endpoint::Exec(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut ch = Self::new(stdout, stdin, timeout);
                ch.child = Some(Mutex::new(child));
                Ok(ch)
            }
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Sends `body` with a fresh `id` field and waits for the reply with the
    /// same id.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp> {
        let mut inner = self.inner.lock().expect("adapter lock");
        inner.next_id += 1;
        let id = inner.next_id.to_string();
        let mut obj = serde_json::to_value(body)?;
        let Value::Object(map) = &mut obj else {
            return Err(Error::AdapterProtocol("request must be an object".into()));
        };
        map.insert("id".into(), Value::String(id.clone()));
        let mut line = serde_json::to_string(&obj)?;
        line.push('\n');
        inner.writer.write_all(line.as_bytes())?;
        inner.writer.flush()?;

        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let raw = match inner.lines.recv_timeout(left) {
                Ok(r) => r?,
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::AdapterTimeout(self.timeout.as_millis() as u64))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::AdapterProtocol("adapter closed the stream".into()))
                }
            };
            let v: Value = serde_json::from_str(&raw)
                .map_err(|e| Error::AdapterProtocol(format!("unparseable response {raw:?}: {e}")))?;
            let got = v.get("id").and_then(Value::as_str).unwrap_or_default();
            if got == id {
                return serde_json::from_value(v)
                    .map_err(|e| Error::AdapterProtocol(format!("bad response {raw:?}: {e}")));
            }
            let stale = got.parse::<u64>().is_ok_and(|n| n < inner.next_id);
            if !stale {
                return Err(Error::AdapterProtocol(format!(
                    "expected response id {id}, got {got:?}"
                )));
            }
        }
    }
}

impl Drop for LineChannel {
    fn drop(&mut self) {
        if let Some(c) = &self.child {
            let mut c = c.lock().unwrap_or_else(|e| e.into_inner());
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}
