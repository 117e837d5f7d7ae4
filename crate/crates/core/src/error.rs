use thiserror::Error;

/// Errors raised by the library.
///
/// The variants fall into two families that the CLI maps to distinct exit
/// codes: contract violations (bad input, broken preconditions) and numerical
/// failures (non-convergence, blow-up, accuracy loss).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("integration accuracy: {0}")]
    Accuracy(String),

    #[error("insufficient data: need at least {needed} usable rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("blow-up detected at iteration {iteration}: theta = {theta:.6e}")]
    BlowupDetected { iteration: usize, theta: f64 },

    #[error("not converged after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("all {0} runs failed")]
    AllRunsFailed(usize),

    #[error("I/O: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Accuracy(_)
                | Error::BlowupDetected { .. }
                | Error::NotConverged { .. }
                | Error::AllRunsFailed(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
