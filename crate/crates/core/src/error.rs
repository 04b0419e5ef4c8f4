use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("atomic proposition sets differ: {0}")]
    ApMismatch(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded (construction bug)")]
    Unbounded,
    #[error("policy error: {0}")]
    Policy(String),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
