//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model space violates a structural invariant (pole closure, positivity of the warp).
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// A time step produced a nonpositive or non-finite value.
    #[error("positivity lost at t = {time}, r = {radius}: u = {value}")]
    PositivityLoss { time: f64, radius: f64, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A hypothesis of an estimate (for instance u <= D) fails at a space-time point.
    #[error("hypothesis violated at r = {radius}, t = {time}: {message}")]
    Hypothesis {
        radius: f64,
        time: f64,
        message: String,
    },

    /// The evaluation time coincides with (or precedes) the cylinder start.
    #[error("clock error: t = {time} is not after the cylinder start {start}")]
    Clock { time: f64, start: f64 },

    #[error("inconsistent cylinder statistics: {0}")]
    StatsInconsistency(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
