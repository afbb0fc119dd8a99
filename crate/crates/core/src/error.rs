use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vector")]
    EmptyVector,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite value produced by {op}")]
    NonFiniteOutput { op: &'static str },
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("function value is not finite at coordinate {coordinate}")]
    NonFiniteFunction { coordinate: usize },

    #[error("invalid model config: {field}: {reason}")]
    ModelConfig { field: &'static str, reason: String },
    #[error("token id {token} at position {position} is out of range for vocabulary of {vocab}")]
    TokenOutOfRange {
        token: usize,
        position: usize,
        vocab: usize,
    },
    #[error("sequence length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty question span")]
    EmptyQuestionSpan,
    #[error("invalid span: {0}")]
    Span(String),
    #[error("degenerate attention")]
    DegenerateAttention,
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite gradient in parameter {param}")]
    NonFiniteGradient { param: String },
    #[error("invalid tuning plan: {0}")]
    Plan(String),
    #[error("step {step} exceeds total_steps {total}")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("division by zero parameter count")]
    ZeroParameterCount,

    #[error("value out of range: {0}")]
    Domain(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no relevant documents")]
    NoRelevantDocuments,
    #[error("need at least 2 observations")]
    TooFewObservations,
    #[error("degenerate variance")]
    DegenerateVariance,

    #[error("invalid data request: {0}")]
    Data(String),
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: u64 },
    #[error("unknown metric {name:?}; valid metrics: {valid}")]
    UnknownMetric { name: String, valid: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
