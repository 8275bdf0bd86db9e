use std::io;

/// Errors produced by graph construction, simulation, inference, and the
/// experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value lies outside the domain where the math is defined
    /// (e.g. a reliability on the boundary of [0, 1]).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally valid input that breaks an invariant
    /// (out-of-range index, duplicate edge, count mismatch, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    /// An error raised while running one cell of an experiment grid.
    #[error("experiment cell ({cell}) failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
