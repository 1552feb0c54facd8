//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("zero denominator")]
    ZeroDenominator,

    #[error("division by zero polynomial")]
    ZeroPolyDivision,

    #[error("matrix is singular over the rational function field")]
    SingularMatrix,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("transfer function is not proper: {0}")]
    NotProper(String),

    #[error("system is unstable: {0}")]
    Unstable(String),

    #[error("synthesis rank assumptions not satisfied: {0}")]
    RankAssumption(String),

    #[error("gamma bisection failed: {0}")]
    SynthesisInfeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the command-line interface: 2 for violated
    /// preconditions, 3 for parse/io problems, 4 for divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::Toml(_) => 3,
            Error::Divergence { .. } => 4,
            _ => 2,
        }
    }
}
