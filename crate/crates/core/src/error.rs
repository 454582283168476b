use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),

    #[error("logit vector is empty")]
    EmptyLogits,

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty trace set")]
    EmptyTraceSet,

    #[error("{path}:{line}: malformed trace record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("sample '{id}': {message}")]
    InvalidSample { id: String, message: String },

    #[error(
        "shape mismatch: sample '{first_id}' has {first_layers} layers x {first_options} options \
         but sample '{other_id}' has {other_layers} x {other_options}"
    )]
    CrossSampleMismatch {
        first_id: String,
        first_layers: usize,
        first_options: usize,
        other_id: String,
        other_layers: usize,
        other_options: usize,
    },

    #[error("duplicate sample id '{0}'")]
    DuplicateId(String),

    #[error("layer index {layer} outside {min}..={max}")]
    LayerOutOfRange {
        layer: usize,
        min: usize,
        max: usize,
    },

    #[error("trajectory needs at least 2 layers, got {0}")]
    TrajectoryTooShort(usize),

    #[error("no agreement samples")]
    NoAgreementSamples,

    #[error("sample '{0}' has no label")]
    MissingLabel(String),

    #[error("label {label} out of range for {options} options")]
    LabelOutOfRange { label: usize, options: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
