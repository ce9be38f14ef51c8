use thiserror::Error;

use crate::chain::NoiseEventLog;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("lattice sum for {what} did not decay below the floor within |x| <= {range}")]
    Truncation { what: String, range: i64 },

    #[error("quadrature could not resolve {what}: last refinement changed the value by {delta:e}")]
    Resolution { what: String, delta: f64 },

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("event budget {budget} exhausted at t = {time} (partial log of {} events kept)", log.len())]
    Budget {
        budget: u64,
        time: f64,
        log: Box<NoiseEventLog>,
    },

    #[error("integration unstable: {0}")]
    Unstable(String),

    #[error("coefficient window too small: tail mass {tail:e} exceeds {limit:e}")]
    Window { tail: f64, limit: f64 },

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
