use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// Not enough eligible samples for the requested feedback.
    #[error("feedback shortage: {}", describe_shortages(.0))]
    Shortage(Vec<Shortage>),

    #[error("non-finite value during {0}")]
    NonFinite(String),

    #[error("candidate bank is stale: built at epoch {bank_epoch}, used at epoch {current_epoch}")]
    StaleBank {
        bank_epoch: usize,
        current_epoch: usize,
    },

    #[error("metric is undefined: {0}")]
    UndefinedMetric(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// I/O failure annotated with the offending path.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numeric failure, 4 shortage.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Shortage(_) => 4,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// A group (class, or finding and error direction) that could not supply the
/// requested number of samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortage {
    pub group: String,
    pub requested: usize,
    pub available: usize,
}

fn describe_shortages(s: &[Shortage]) -> String {
    s.iter()
        .map(|s| format!("{} requested {}, only {} eligible", s.group, s.requested, s.available))
        .collect::<Vec<_>>()
        .join("; ")
}
