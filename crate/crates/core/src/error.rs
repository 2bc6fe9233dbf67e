//! Error type shared by every module.

use thiserror::Error;

/// Failures reported by model construction, evaluation and integration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("expression error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("not regular: {what} (condition estimate {condition:e})")]
    NotRegular { what: String, condition: f64 },
    #[error("rank deficiency: {0}")]
    Rank(String),
    #[error("Legendre inversion did not converge after {iterations} iterations (residual {residual:e})")]
    Hyperregularity { iterations: usize, residual: f64 },
    #[error("integration failed at t = {time}: {message}")]
    Integration {
        time: f64,
        message: String,
        last_state: Vec<f64>,
    },
    #[error("misuse: {0}")]
    Misuse(String),
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context: context.to_string(),
            expected,
            got,
        })
    }
}
