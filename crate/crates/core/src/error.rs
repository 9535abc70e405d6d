use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document title {0:?}")]
    DuplicateTitle(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("proof syntax error at offset {offset}: {message}")]
    ProofSyntax { offset: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors raised by an external backend (scorer, reranker or prover
    /// process) rather than by the inputs.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::Protocol(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateTitle(_) => "duplicate_title",
            Error::Constraint(_) => "constraint",
            Error::NotFound(_) => "not_found",
            Error::Contract(_) => "contract",
            Error::ProofSyntax { .. } => "proof_syntax",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Transport(_) => "transport",
            Error::Protocol(_) => "protocol",
        }
    }
}
