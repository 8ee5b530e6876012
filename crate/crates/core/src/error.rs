use thiserror::Error;

use crate::geometry::AgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate point set: all points coincide")]
    DegeneratePoints,
    #[error("observation timestamps must be strictly increasing")]
    NonIncreasingTimestamps,
    #[error("no formation target for agent {0}")]
    MissingTarget(AgentId),
    #[error("invalid formation: {0}")]
    InvalidFormation(String),
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error("scenario syntax error at line {line}, column {column}: {message}")]
    ScenarioSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("empty metrics window: {0}")]
    EmptyWindow(String),
    #[error("target RMSE {target_cm} cm unreachable for sigma in [{lo}, {hi}] m (achieved {lo_rmse_cm}..{hi_rmse_cm} cm)")]
    CalibrationUnreachable {
        target_cm: f64,
        lo: f64,
        hi: f64,
        lo_rmse_cm: f64,
        hi_rmse_cm: f64,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
