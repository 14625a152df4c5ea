use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SysIdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("no observations accumulated")]
    Empty,

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("modified estimate unavailable: {0}")]
    ModifiedUnavailable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unidentifiable coordinate {0}: zero Gram diagonal with nonzero cross term")]
    Unidentifiable(usize),

    #[error("no acceptable real root")]
    NoRealRoot,

    #[error("trajectory diverged at step {step} (|y| = {magnitude:e})")]
    Diverged { step: usize, magnitude: f64 },

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl SysIdError {
    /// Short machine-readable tag used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "dimension_mismatch",
            Self::NonFinite(_) => "non_finite",
            Self::Asymmetric(_) => "asymmetric",
            Self::Empty => "empty",
            Self::Singular(_) => "singular",
            Self::ModifiedUnavailable(_) => "modified_unavailable",
            Self::InvalidArgument(_) => "invalid_argument",
            Self::Unidentifiable(_) => "unidentifiable",
            Self::NoRealRoot => "no_real_root",
            Self::Diverged { .. } => "diverged",
            Self::Io(_) => "io",
            Self::Parse(_) => "parse",
        }
    }
}

impl From<std::io::Error> for SysIdError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for SysIdError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SysIdError {
    fn from(e: serde_json::Error) -> Self {
        Self::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SysIdError>;
