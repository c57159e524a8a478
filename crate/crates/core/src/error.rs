use std::path::PathBuf;

use thiserror::Error;

use crate::mpc::BinDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, policy or configuration violates its invariants.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("simulation diverged at t = {time}: {reason}")]
    Simulation { time: f64, reason: String },

    /// A sampled path exceeded the event cap: the controlled process is explosive.
    #[error("more than {limit} events by t = {time}")]
    EventLimit { time: f64, limit: usize },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("control run aborted in bin {bin}: {source}")]
    Aborted {
        bin: usize,
        diagnostics: Vec<BinDiagnostics>,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_event_limit(&self) -> bool {
        match self {
            Error::EventLimit { .. } => true,
            Error::Sample { source, .. } | Error::Aborted { source, .. } => source.is_event_limit(),
            _ => false,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Invalid(_) | Error::Config(_) => true,
            Error::Sample { source, .. } | Error::Aborted { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
