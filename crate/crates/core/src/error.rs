use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pump power {power} W is below the oscillation threshold {threshold} W")]
    BelowThreshold { power: f64, threshold: f64 },

    #[error("`{name}` = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("target spectrum is not factorizable: B^2 - A = {residual} < 0")]
    NonFactorizable { residual: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("frequency grids differ: {0}")]
    GridMismatch(String),

    #[error("reference spectrum is zero at bin {bin}")]
    DegenerateReference { bin: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("incomplete trace set: missing {0}")]
    IncompleteSet(String),

    #[error("config validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for bad input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Json(_) => 2,
            _ => 1,
        }
    }
}
