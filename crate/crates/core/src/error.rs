use std::path::PathBuf;

use crate::data::DomainId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in this crate.
///
/// Variants fall into four families (configuration, data, numerical, IO); the
/// family decides the process exit code used by the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("tape does not match parameters: {0}")]
    StaleTape(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("non-finite loss at epoch {epoch}, step {step}: {loss}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("beta must lie in [0, 1], got {0}")]
    BetaOutOfRange(f64),

    #[error("unknown domain id {0}")]
    UnknownDomain(DomainId),
    #[error("missing meta-data for domain {0}")]
    MissingMeta(DomainId),
    #[error("domain {0} is assigned to more than one split")]
    OverlappingSplits(DomainId),
    #[error("domain {0} has no split assignment")]
    MissingSplit(DomainId),
    #[error("domain {0} has no examples")]
    EmptyDomain(DomainId),
    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("relation row is all zero")]
    ZeroRelationRow,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("unsupported checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::BetaOutOfRange(_) => ErrorKind::Config,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } | Error::Singular(_) => ErrorKind::Numerical,
            Error::DimensionMismatch { .. }
            | Error::StaleTape(_)
            | Error::LabelOutOfRange { .. }
            | Error::InvalidParams(_)
            | Error::UnknownDomain(_)
            | Error::MissingMeta(_)
            | Error::OverlappingSplits(_)
            | Error::MissingSplit(_)
            | Error::EmptyDomain(_)
            | Error::MalformedRow { .. }
            | Error::EmptyBatch
            | Error::ZeroRelationRow
            | Error::InvalidDataset(_)
            | Error::Checkpoint(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, reason: impl Into<String>) -> Self {
        Error::MalformedRow {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
