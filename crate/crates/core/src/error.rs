use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix: pivot magnitude {pivot:e} at column {column} is below {threshold:e}")]
    Singular {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("series diverges: spectral radius {rho} is not below 1")]
    Divergent { rho: f64 },

    #[error("infeasible distribution: spectral radius rho(NT) = {rho} is not below the bound {bound}")]
    Infeasible { rho: f64, bound: f64 },

    #[error("refusing to enumerate {count} compositions (cap is {cap})")]
    CapExceeded { count: u128, cap: u128 },

    #[error("no feasible distribution: all {evaluated} compositions have rho(NT) at or above the bound")]
    NoFeasiblePoint { evaluated: u64 },

    #[error("unsupported dimension: m = {m} (only m = {expected} is supported)")]
    UnsupportedDimension { m: usize, expected: usize },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
