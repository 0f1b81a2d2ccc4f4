use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("empty window [{lo}, {hi}]")]
    EmptyWindow { lo: i64, hi: i64 },

    #[error("site {site} is outside the realized data and the environment cannot be regenerated")]
    OutsideWindow { site: i64 },

    #[error("singular matrix: {context}")]
    Singular { context: String },

    #[error("matrix singular to working precision at site {site} of the product stream")]
    SingularStream { site: i64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("iteration did not converge: {0}")]
    NotConverged(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
