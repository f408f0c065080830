use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration did not converge within {max_subdivisions} subdivisions on [{lo}, {hi}]")]
    NonConvergence {
        lo: f64,
        hi: f64,
        max_subdivisions: usize,
    },

    #[error("root is not bracketed: g({lo}) = {g_lo}, g({hi}) = {g_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("no data at the current dose")]
    NoData,

    #[error("design {0} is history dependent and has no (n, y) decision table")]
    HistoryDependent(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
