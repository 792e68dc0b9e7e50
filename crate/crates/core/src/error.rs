use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("too few plots: need at least {needed}, got {got}")]
    TooFewPlots { needed: usize, got: usize },

    #[error("invalid fraction {name} = {value}: must lie strictly between 0 and 1")]
    InvalidFraction { name: &'static str, value: f64 },

    #[error("predictor '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("unknown predictor '{0}'")]
    UnknownPredictor(String),

    #[error("missing predictors: {}", .0.join(", "))]
    MissingPredictors(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("lasso did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("plot at row {0} is never out-of-bag; grow more trees")]
    NeverOutOfBag(usize),

    #[error("observed response is constant; R² is undefined")]
    ConstantResponse,

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("length mismatch: {0} observed vs {1} predicted")]
    LengthMismatch(usize, usize),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("raster georeference mismatch: {0}")]
    GeoMismatch(String),

    #[error("missing band for predictor '{0}'")]
    MissingBand(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("unsupported document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
