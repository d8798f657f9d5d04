use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Verdicts (membership, extremality, locality) are values, not errors. An
/// `Error` means the input could not be interpreted at all.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tensor has {actual} entries, scenario requires {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unsupported scenario: {0}")]
    Unsupported(String),

    #[error("arrow-of-time violated: residual {residual:e} exceeds tolerance {tol:e}")]
    ArrowOfTime { residual: f64, tol: f64 },

    #[error("history {0} is out of range for the scenario")]
    HistoryOutOfRange(String),

    #[error("missing entry for history {0}")]
    MissingHistory(String),

    #[error("history {history} has probability {probability:e} but no conditional box was supplied")]
    ZeroHistoryOnSupport { history: String, probability: f64 },

    #[error("box is not normalized: residual {0:e}")]
    NotNormalized(f64),

    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid quantum object: {0}")]
    InvalidQuantum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no verdict after {iterations} iterations (distance bound {distance:e})")]
    Inconclusive { iterations: usize, distance: f64 },

    #[error("failed to parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
