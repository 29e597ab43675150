use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    Axis { axis: usize, dim: usize },

    #[error("invalid configuration at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("integration failed at t = {time:.6e} (dt = {dt:.3e}): {reason}")]
    Integration { time: f64, dt: f64, reason: String },

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
