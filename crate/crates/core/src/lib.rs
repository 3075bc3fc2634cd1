pub mod adapter;
pub mod augment;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod postprocess;
pub mod rules;
pub mod schema;
pub mod serve;
pub mod synth;
pub mod tagger;

pub use error::{Error, Result};
