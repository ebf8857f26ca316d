//! Error type shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors fall into three broad classes — configuration, data, estimation —
/// which the CLI maps onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed, missing, or out-of-contract input data.
    #[error("data error: {0}")]
    Data(String),

    /// A point fell outside the grid's bounding box under the strict policy.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// Lookup of a cell id that is not part of the grid.
    #[error("unknown cell (q={q}, r={r})")]
    UnknownCell { q: i32, r: i32 },

    /// A named variable is not present in the fit or sample.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// The design matrix is rank deficient; names one dependent column.
    #[error("rank-deficient design: column `{0}` is linearly dependent on earlier columns")]
    RankDeficient(String),

    /// An estimator could not produce a valid result.
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Estimation,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::UnknownVariable(_) => ErrorClass::Config,
            Error::Data(_)
            | Error::OutOfDomain(_)
            | Error::UnknownCell { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::RankDeficient(_) | Error::Estimation(_) => ErrorClass::Estimation,
        }
    }
}
