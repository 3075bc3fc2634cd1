//! Dynamic batching, the serving harness and its load generator.

mod batching;
mod loadgen;
mod metrics;
mod server;
mod sim;

pub use batching::{form_batches, next_deadline, Batch, BatchPolicy, QueueItem, Strategy};
pub use loadgen::{run_loadgen, schedule, LoadReport, LoadgenConfig};
pub use metrics::{percentile, Metrics, ServerMetrics};
pub use server::{serve, Response, ResponseTimings, ServerConfig, ServerHandle};
pub use sim::{bimodal_workload, idle_wait_violations, simulate, ServiceModel, SimBatch, SimReport};
