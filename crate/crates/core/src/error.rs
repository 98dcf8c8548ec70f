//! Error types.

use thiserror::Error;

/// Errors raised while reading or validating a circulant table.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    /// A line could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    /// A row index lies outside `[0, M)`.
    #[error("line {line}: row index {index} out of range (M = {m})")]
    Range { line: usize, index: usize, m: usize },
    /// An index appears twice in one group.
    #[error("line {line}: duplicate row index {index} in group")]
    Duplicate { line: usize, index: usize },
    /// The code dimensions are incompatible with the 360-column group structure.
    #[error("structure error: {0}")]
    Structure(String),
}

/// Errors raised by the coding, channel, and analysis operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Table(#[from] TableError),
    /// Input length does not match what the code expects.
    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A rate-adaptation construction is impossible for the given code.
    #[error("construction error: {0}")]
    Construction(String),
    /// No scheme in the code bank reaches the requested operating point.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A threshold search could not bracket the target.
    #[error("range error: {0}")]
    Range(String),
    /// Physical parameters outside their valid domain.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("i/o error: {0}")]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
