use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An exponent or index outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectrum violates support premise; offending modes: {modes:?}")]
    Support { modes: Vec<Vec<i64>> },

    #[error("exponent relation: {0}")]
    Relation(String),

    #[error("inadmissible parameters: {}", .0.join("; "))]
    Inadmissible(Vec<String>),

    #[error("unknown case id `{0}`")]
    UnknownCase(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
