use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Fifo,
    LengthBucketed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchPolicy {
    pub max_batch: usize,
    pub max_wait_ms: u64,
    /// Ascending token-count boundaries; longer items share an overflow bucket.
    pub buckets: Vec<usize>,
    pub strategy: Strategy,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        Self {
            max_batch: 32,
            max_wait_ms: 20,
            buckets: vec![16, 32, 64, 128, 256],
            strategy: Strategy::LengthBucketed,
        }
    }
}

impl BatchPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_batch == 0 {
            return Err(Error::Config("max_batch must be at least 1".into()));
        }
        if self.buckets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("bucket boundaries must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::Config(format!("batch policy: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn max_wait_us(&self) -> u64 {
        self.max_wait_ms * 1000
    }

    /// Index of the first boundary ≥ `len`, or the overflow bucket.
    pub fn bucket_of(&self, len: usize) -> usize {
        self.buckets.iter().position(|&b| len <= b).unwrap_or(self.buckets.len())
    }
}

/// A queued request: arrival time in microseconds and token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueItem {
    pub id: u64,
    pub arrival_us: u64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<QueueItem>,
}

impl Batch {
    pub fn padded_len(&self) -> usize {
        self.items.iter().map(|i| i.len).max().unwrap_or(0)
    }

    pub fn real_tokens(&self) -> usize {
        self.items.iter().map(|i| i.len).sum()
    }

    pub fn slots(&self) -> usize {
        self.items.len() * self.padded_len()
    }

    /// `1 − real tokens / (batch size × longest item)`.
    pub fn padding_ratio(&self) -> f64 {
        let slots = self.slots();
        if slots == 0 {
            0.0
        } else {
            1.0 - self.real_tokens() as f64 / slots as f64
        }
    }

    pub fn oldest_arrival(&self) -> u64 {
        self.items.iter().map(|i| i.arrival_us).min().unwrap_or(u64::MAX)
    }
}

fn chunk(items: Vec<QueueItem>, policy: &BatchPolicy, now_us: u64, out: &mut Vec<(bool, Batch)>) {
    for c in items.chunks(policy.max_batch) {
        let b = Batch { items: c.to_vec() };
        let overdue = now_us.saturating_sub(b.oldest_arrival()) >= policy.max_wait_us();
        if c.len() == policy.max_batch || overdue {
            out.push((overdue, b));
        }
    }
}

/// Batches ready to run at `now_us`. Full batches are always ready; a partial
/// batch is ready once its oldest item has waited `max_wait`. Overdue batches
/// come first, oldest first; then the rest by oldest arrival.
pub fn form_batches(queue: &[QueueItem], policy: &BatchPolicy, now_us: u64) -> Vec<Batch> {
    let mut items = queue.to_vec();
    items.sort_by_key(|i| (i.arrival_us, i.id));
    let mut ready: Vec<(bool, Batch)> = Vec::new();
    match policy.strategy {
        Strategy::Fifo => chunk(items, policy, now_us, &mut ready),
        Strategy::LengthBucketed => {
            let mut groups: Vec<Vec<QueueItem>> = vec![Vec::new(); policy.buckets.len() + 1];
            for it in items {
                groups[policy.bucket_of(it.len)].push(it);
            }
            for g in groups {
                chunk(g, policy, now_us, &mut ready);
            }
        }
    }
    ready.sort_by_key(|(overdue, b)| (!overdue, b.oldest_arrival()));
    ready.into_iter().map(|(_, b)| b).collect()
}

/// Earliest time at which a queued partial batch becomes overdue.
pub fn next_deadline(queue: &[QueueItem], policy: &BatchPolicy) -> Option<u64> {
    queue.iter().map(|i| i.arrival_us + policy.max_wait_us()).min()
}
