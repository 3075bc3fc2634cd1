use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("overlapping spans: ({0}, {1}) and ({2}, {3})")]
    OverlappingSpans(usize, usize, usize, usize),

    #[error("span ({start}, {end}) out of bounds for sequence of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("malformed line {line}: {content:?}")]
    MalformedLine { line: usize, content: String },

    #[error("record {record_id}: entity bytes {start}..{end} do not align to token boundaries")]
    MisalignedEntity {
        record_id: String,
        start: usize,
        end: usize,
    },

    #[error("schema invalid:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("invalid rule set:\n  {}", .0.join("\n  "))]
    Rules(Vec<String>),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("corpus contains no records with gold annotations")]
    EmptyCorpus,

    #[error("schema mismatch: model built for {expected:?}, active schema is {found:?}")]
    SchemaMismatch { expected: String, found: String },

    #[error("adapter did not answer within {0} ms")]
    AdapterTimeout(u64),

    #[error("adapter protocol error: {0}")]
    AdapterProtocol(String),

    #[error("record {0}: an entity could not be relocated in the translated text")]
    EntityLost(String),

    #[error("record {0} has no gold annotation")]
    MissingGold(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
