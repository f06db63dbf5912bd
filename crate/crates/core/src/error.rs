use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("not in the almost calibrated space: {0}")]
    NotMember(String),
    #[error("ambiguous lifted phase: {0}")]
    AmbiguousBranch(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("formula error: {0}")]
    Formula(String),
}

pub type Result<T> = std::result::Result<T, Error>;
