use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit. Each variant names one failure category;
/// the CLI prints the category on standard error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected increment: {0}")]
    RejectedIncrement(String),

    #[error("unknown node {0}")]
    UnknownNode(u32),

    #[error("triangle closure needs an anchor node for this choice")]
    MissingAnchor,

    #[error("every component of the model is degenerate over the eligible set")]
    DegenerateModel,

    #[error("similarity is undefined for anchor-dependent component {0}")]
    UnsupportedSimilarity(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model spec parse error at column {column}: {message}")]
    ModelSpec { column: usize, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("per-choice ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("no feasible grid point: every candidate gives an impossible observation")]
    NoFeasibleFit,

    #[error("interval {interval} of {count} contains no increments")]
    IntervalUnderflow { interval: usize, count: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("models are not nested: logL1 = {logl1} < logL0 = {logl0}")]
    NestingViolation { logl0: f64, logl1: f64 },

    #[error("growth stalled: {0}")]
    GrowthStall(String),

    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-friendly category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::RejectedIncrement(_) => "rejected-increment",
            Error::UnknownNode(_) => "unknown-node",
            Error::MissingAnchor => "missing-anchor",
            Error::DegenerateModel => "degenerate-model",
            Error::UnsupportedSimilarity(_) => "unsupported-similarity",
            Error::InvalidModel(_) => "invalid-model",
            Error::ModelSpec { .. } => "model-spec",
            Error::Parse { .. } => "parse",
            Error::UndefinedRatio(_) => "undefined-ratio",
            Error::NoFeasibleFit => "no-feasible-fit",
            Error::IntervalUnderflow { .. } => "interval-underflow",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::NestingViolation { .. } => "nesting-violation",
            Error::GrowthStall(_) => "growth-stall",
            Error::InvalidRecipe(_) => "invalid-recipe",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
