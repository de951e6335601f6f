use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants map onto the failure classes the experiment harness reports:
/// bad arguments and configurations are validation failures, everything else
/// is an accuracy or state failure of a computation that was set up correctly.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KacError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("accuracy check failed: {what} (estimate {estimate:.3e}, limit {limit:.3e})")]
    Accuracy {
        what: String,
        estimate: f64,
        limit: f64,
    },

    #[error("u = {u} outside the ladder grid [0, {u_max}]")]
    Range { u: f64, u_max: f64 },

    #[error("missing state: {0}")]
    State(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),

    #[error("time stepping unstable: clipped mass {clipped:.3e} at t = {time}")]
    Stability { clipped: f64, time: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl KacError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        KacError::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        KacError::Configuration(msg.into())
    }

    pub(crate) fn accuracy(what: impl Into<String>, estimate: f64, limit: f64) -> Self {
        KacError::Accuracy {
            what: what.into(),
            estimate,
            limit,
        }
    }

    /// True for failures caused by the caller's inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            KacError::Argument(_) | KacError::Configuration(_) | KacError::Range { .. }
        )
    }
}

impl From<std::io::Error> for KacError {
    fn from(e: std::io::Error) -> Self {
        KacError::Io(e.to_string())
    }
}

impl From<csv::Error> for KacError {
    fn from(e: csv::Error) -> Self {
        KacError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for KacError {
    fn from(e: serde_json::Error) -> Self {
        KacError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KacError>;
