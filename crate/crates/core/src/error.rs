use thiserror::Error;

use crate::sysid::FpeReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("simulation fault at sample {index}: {reason}")]
    Simulation { index: usize, reason: String },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("training failed after {restarts} restarts: {reason}")]
    Training { restarts: usize, reason: String },

    #[error("structure selection failed: {reason}")]
    Selection {
        reason: String,
        report: Box<FpeReport>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for faults raised by the arithmetic itself rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Numerical(_)
                | Error::Simulation { .. }
                | Error::Training { .. }
                | Error::Selection { .. }
        )
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn format(line: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            line,
            reason: reason.into(),
        }
    }
}
