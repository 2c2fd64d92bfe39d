use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window too short: {len} points cannot identify a {knots}-knot spline")]
    WindowTooShort { len: usize, knots: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("series {index}: {source}")]
    Series {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty cluster {0}")]
    EmptyCluster(usize),

    #[error("no kernel proposal reached variance rate {rate}; best achievable rates: {best:?}")]
    VarianceRateUnreachable { rate: f64, best: Vec<f64> },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn in_series(self, index: usize) -> Self {
        Error::Series {
            index,
            source: Box::new(self),
        }
    }
}
