use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    /// Malformed ingest file: names the offending row (1-based, header is row 1) and column.
    #[error("row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid series `{id}`: {message}")]
    InvalidSeries { id: String, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("series `{0}` is constant and cannot be normalized")]
    DegenerateSeries(String),

    #[error("group centroid is constant and cannot be used as a normalization reference")]
    DegenerateCentroid,

    #[error("no normalization parameters for series `{0}`")]
    UnknownSeries(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("clustering: {0}")]
    Clustering(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    /// Antibody string rejected by the parser; `offset` counts signs from 0.
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("expected {expected} constants, got {got}")]
    ConstantCount { expected: usize, got: usize },

    #[error("antibody has no lagged terminal")]
    NoLaggedTerminal,

    #[error("window is missing lag {0}")]
    MissingLag(usize),

    #[error("zero actual value at position {position} makes the relative error undefined")]
    ZeroDenominator { position: usize },

    #[error("training series too short: {len} points, need more than {needed}")]
    TrainTooShort { len: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("workspace: {0}")]
    Workspace(String),

    #[error("{stage} failed for {subject}: {source}")]
    Stage {
        stage: &'static str,
        subject: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, subject: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            subject: subject.into(),
            source: Box::new(self),
        }
    }

    /// Usage and parse problems map to exit code 2, everything else to 1.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::InvalidConfig(_) => true,
            Error::Stage { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
