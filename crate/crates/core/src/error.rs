use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or combination of parameters is not admissible.
    #[error("configuration error: {0}")]
    Config(String),
    /// Tensor, stream or blob has the wrong shape or layout.
    #[error("structural error: {0}")]
    Structure(String),
    /// A record of an input stream is invalid.
    #[error("record {index}: {reason}")]
    Record { index: usize, reason: String },
    /// Parse failure in a text format, with a 1-based line number.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("training error: {0}")]
    Training(String),
    /// Configuration validation failed; every violated rule is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
