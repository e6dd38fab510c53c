use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch for {what}: expected {expected}, found {found}")]
    Arity {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("feature index {index} out of range for {p} features")]
    FeatureIndex { index: usize, p: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("empty range: {0}")]
    EmptyRange(String),

    #[error("infeasible tolerance: {message} (samples {samples:?})")]
    Infeasible { message: String, samples: Vec<usize> },

    #[error("solver failed: {message} (last iterate {last:?})")]
    Solver { message: String, last: Vec<f64> },

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("load error at row {row}, column '{column}': {message}")]
    Load {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
