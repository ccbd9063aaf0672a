use thiserror::Error;

use crate::mesh::MeshError;
use crate::sparse::SolverError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{stage}: {source}")]
    Solver {
        stage: &'static str,
        #[source]
        source: SolverError,
    },
    #[error("invalid material catalog: {0}")]
    Material(String),
    #[error("degenerate contrast for phase pair {a} -> {b}: {what} vanishes")]
    DegenerateContrast { a: usize, b: usize, what: &'static str },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("{}", config_message(.line, .key, .message))]
    Config { line: Option<usize>, key: String, message: String },
    #[error("non-finite value in {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
}

fn config_message(line: &Option<usize>, key: &str, message: &str) -> String {
    match (line, key.is_empty()) {
        (Some(l), false) => format!("config error at line {l}, key `{key}`: {message}"),
        (Some(l), true) => format!("config error at line {l}: {message}"),
        (None, false) => format!("config error, key `{key}`: {message}"),
        (None, true) => format!("config error: {message}"),
    }
}

impl Error {
    pub fn solver(stage: &'static str, source: SolverError) -> Self {
        Error::Solver { stage, source }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
