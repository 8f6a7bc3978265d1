use std::path::PathBuf;

use thiserror::Error;

use crate::export::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),

    #[error("pulse: {0}")]
    Pulse(String),

    #[error("hamiltonian: {0}")]
    Hamiltonian(String),

    #[error("time {t} us is outside [0, {duration}] us")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("state: {0}")]
    State(String),

    #[error("noise: {0}")]
    Noise(String),

    #[error("data: {0}")]
    Data(String),

    #[error("training: {0}")]
    Training(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("export refused, {} violation(s): {}", .0.len(), join_violations(.0))]
    ExportRefused(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
