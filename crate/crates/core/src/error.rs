//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration key failed validation or was not recognized.
    #[error("config error{}: {message}", fmt_loc(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    /// A text artifact (dataset, checkpoint, manifest) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A file parsed but its contents violate the declared schema.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    /// Tensor shapes do not line up.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// An operation that needs data was handed an empty source.
    #[error("empty source: {0}")]
    EmptySource(&'static str),

    /// Q-values left the plausible range during training.
    #[error("divergence at step {step}: mean |Q| = {mean_abs_q:.6e} exceeds guard {threshold:.6e}")]
    Divergence {
        step: usize,
        mean_abs_q: f64,
        threshold: f64,
    },

    /// Exact hull classification is only available in low dimension.
    #[error("unsupported action dimension {0}: exact hull classification requires dim <= 3")]
    UnsupportedDimension(usize),

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_loc(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" (key `{k}`, line {l})"),
        (Some(k), None) => format!(" (key `{k}`)"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            key: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn config_key(key: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            line: Some(line),
            message: message.into(),
        }
    }
}
