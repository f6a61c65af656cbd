use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("dimension {dim} is constant and cannot be standardized")]
    DegenerateDimension { dim: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("series too short: need at least {needed} rows, have {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("integration produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("column '{0}' not found")]
    MissingColumn(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: String },

    #[error("differences of dimension {dim} have zero range")]
    ZeroRange { dim: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("context has {actual} rows, need at least {needed}")]
    ContextTooShort { needed: usize, actual: usize },

    #[error("failed to spawn generator process: {0}")]
    Spawn(String),

    #[error("handshake mismatch: expected dims={expected_dims} context_len={expected_context}, child reported dims={dims} context_len={context}")]
    HandshakeMismatch {
        expected_dims: usize,
        expected_context: usize,
        dims: usize,
        context: usize,
    },

    #[error("generator timed out after {timeout_ms} ms (request {request})")]
    Timeout { request: u64, timeout_ms: u64 },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("generator process exited: {0}")]
    ChildExit(String),

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("too few points: need more than {needed}, have {actual}")]
    TooFewPoints { needed: usize, actual: usize },

    #[error("too few windows: need at least {needed} per side, have {actual}")]
    TooFewWindows { needed: usize, actual: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("subset of output states is empty")]
    EmptySubset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the variant, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSeries(_) => "InvalidSeries",
            Error::DegenerateDimension { .. } => "DegenerateDimension",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::Parse { .. } => "ParseError",
            Error::MissingColumn(_) => "MissingColumn",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::ZeroRange { .. } => "ZeroRange",
            Error::InsufficientData(_) => "InsufficientData",
            Error::SingularDesign(_) => "SingularDesign",
            Error::ContextTooShort { .. } => "ContextTooShort",
            Error::Spawn(_) => "SpawnError",
            Error::HandshakeMismatch { .. } => "HandshakeMismatch",
            Error::Timeout { .. } => "Timeout",
            Error::Protocol(_) => "ProtocolError",
            Error::ChildExit(_) => "ChildExit",
            Error::ZeroVariance => "ZeroVariance",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::TooFewWindows { .. } => "TooFewWindows",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::EmptySubset => "EmptySubset",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::AtStep { source, .. } => source.kind(),
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    /// The innermost error, skipping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
