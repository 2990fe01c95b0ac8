use std::io;
use std::path::PathBuf;
use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate outside Web-Mercator validity: lat {lat}, lon {lon}")]
    CoordinateOutOfRange { lat: f64, lon: f64 },

    #[error("invalid quadkey {0:?}: expected 24 digits over 0..=3")]
    InvalidQuadkey(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("transition matrix undefined for an empty graph")]
    EmptyGraph,

    #[error("n-step nonzero budget exceeded: {nonzeros} entries > cap {cap}")]
    NnzBudgetExceeded { nonzeros: usize, cap: usize },

    #[error("unknown normalization scheme {0:?}")]
    UnknownScheme(String),

    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("artifact mismatch on {field}: expected {expected}, found {actual}")]
    ArtifactMismatch {
        field: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite loss at epoch {epoch}, step {step}: {value}")]
    NonFiniteLoss { epoch: usize, step: usize, value: f64 },

    #[error("determinism violation: {0}")]
    Determinism(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Shorthand for a file-format error.
    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
