use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PortfolioError>;

#[derive(Debug, Error)]
pub enum PortfolioError {
    /// A distribution or model parameter lies outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The Wishart matrix could not be Cholesky-factorized.
    #[error(
        "singular Wishart matrix: {assets} risky assets with {periods} periods \
         (positive definiteness needs periods >= assets and non-degenerate returns)"
    )]
    Singular { assets: usize, periods: usize },

    /// Budget and return constraints are collinear (V1 vanishes) or a
    /// direction vector is zero.
    #[error("degenerate constraints: {0}")]
    Degenerate(String),

    /// A closed form was evaluated outside its domain (alpha <= 1 and friends).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Sharpe ratio undefined for non-positive risk {eps}")]
    UndefinedSharpe { eps: f64 },

    #[error("infeasible risk budget: radicand {radicand} is negative")]
    InfeasibleRiskBudget { radicand: f64 },

    #[error("no tangency portfolio: R1 = {r1} does not exceed R0 = {r0}")]
    NoTangency { r1: f64, r0: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{failed} of {total} trials failed (first failure: {reason})")]
    ExperimentFailed {
        failed: usize,
        total: usize,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },
}

impl PortfolioError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PortfolioError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        PortfolioError::Data {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
