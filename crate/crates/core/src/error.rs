use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A site or node index outside the declared layout.
    #[error("index error: {0}")]
    Index(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// A spec document that parsed but violates an invariant; `path` names the field.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("model error: {0}")]
    Model(String),

    /// The operation requires single-sample occupancies (one sample per node).
    #[error("mode error: {0}")]
    Mode(String),

    #[error("capacity error: {what} has size {size}, limit is {limit}")]
    Capacity { what: String, size: u128, limit: u128 },

    #[error("reducible kernel: {0}")]
    Reducible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

/// Default ceiling on enumerated states and generated monomials.
pub const DEFAULT_CAPACITY: u128 = 1_000_000;

/// Environment variable overriding [`DEFAULT_CAPACITY`].
pub const CAPACITY_ENV: &str = "FOCKMRF_MAX_STATES";

/// Capacity guard, honouring [`CAPACITY_ENV`] when set to a positive integer.
pub fn capacity_limit() -> u128 {
    std::env::var(CAPACITY_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u128>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_CAPACITY)
}

pub(crate) fn check_capacity(what: &str, size: u128) -> Result<()> {
    let limit = capacity_limit();
    if size > limit {
        return Err(Error::Capacity { what: what.to_string(), size, limit });
    }
    Ok(())
}
