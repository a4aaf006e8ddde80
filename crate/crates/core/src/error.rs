use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the camouflage search pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid color channel {value} (expected 0..=255)")]
    InvalidColor { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient population: need at least 2 scores, got {0}")]
    InsufficientPopulation(usize),

    #[error("incomplete evaluation: missing score for transformation {transformation}, candidate {candidate}")]
    IncompleteEvaluation { transformation: usize, candidate: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("no ground truth boxes for image")]
    NoGroundTruth,

    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("service error (HTTP {status}): {body}")]
    Service { status: u16, body: String },

    #[error("protocol error in field `{field}`: {message}")]
    Protocol { field: String, message: String },

    #[error("protocol version mismatch: expected {expected}, service reports {got}")]
    Version { expected: String, got: String },

    #[error("scorer error: {0}")]
    Scorer(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::InvalidColor { .. } => "invalid_color",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Parse { .. } => "parse",
            Error::Domain(_) => "domain",
            Error::InsufficientPopulation(_) => "insufficient_population",
            Error::IncompleteEvaluation { .. } => "incomplete_evaluation",
            Error::InvalidBox(_) => "invalid_box",
            Error::NoGroundTruth => "no_ground_truth",
            Error::EmptyEvaluation => "empty_evaluation",
            Error::Config(_) => "config",
            Error::OracleUnavailable(_) => "oracle_unavailable",
            Error::Transport(_) => "transport",
            Error::Service { .. } => "service",
            Error::Protocol { .. } => "protocol",
            Error::Version { .. } => "version",
            Error::Scorer(_) => "scorer",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
