use alloc::string::String;
use alloc::vec::Vec;

/// Failure classes surfaced by the estimation pipeline.
///
/// Variants are grouped by [`ErrorClass`] so front ends can map them onto a
/// stable exit-code taxonomy.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("ingest error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },
    #[error("shock differs across units in period {period}")]
    ShockInconsistency { period: i64 },
    #[error("unbalanced panel: {} missing (unit, period) cells, first {:?}", missing.len(), missing.first())]
    Balance { missing: Vec<(String, i64)> },
    #[error("horizon error: {0}")]
    Horizon(String),
    #[error("basis error: {0}")]
    Basis(String),
    #[error("design error: {0}")]
    Design(String),
    #[error("rank-deficient design: column {column} ({detail})")]
    Rank { column: usize, detail: String },
    #[error("selection error: {0}")]
    Selection(String),
    #[error("lasso path did not converge within {sweeps} sweeps at lambda {lambda}")]
    Convergence { sweeps: usize, lambda: f64 },
    #[error("HAC error: {0}")]
    Hac(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("study error: {0}")]
    Study(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("aggregation error: all weights are zero in period {period}")]
    Aggregation { period: i64 },
    #[error("config error: {0}")]
    Config(String),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numeric,
    Config,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Ingest { .. }
            | Error::ShockInconsistency { .. }
            | Error::Balance { .. }
            | Error::Domain(_) => ErrorClass::Input,
            Error::Horizon(_) | Error::Config(_) | Error::Design(_) => ErrorClass::Config,
            _ => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
