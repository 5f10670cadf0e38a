use thiserror::Error;

use crate::expr::ExprError;

/// Errors raised by the analysis modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "perturbed family is not monotone at t = {t}: trajectory {index} exceeds its successor by {excess:e} (step too coarse?)"
    )]
    NonMonotoneFamily { t: f64, index: usize, excess: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mu(w) = {value:e} <= 0 at w = {w} inside the integration range")]
    SignViolation { w: f64, value: f64 },

    #[error("no grid point satisfies |h(x)| <= {band}")]
    EmptyBoundary { band: f64 },

    #[error("quadratic program infeasible at t = {t}, x = {x:?}")]
    QpInfeasibleAtState { t: f64, x: Vec<f64> },

    #[error("expression error at t = {t}, x = {x:?}: {source}")]
    DomainAtState {
        t: f64,
        x: Vec<f64>,
        #[source]
        source: ExprError,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
