use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{}: no pixel values", .0.display())]
    EmptyData(PathBuf),
    #[error("{path}: {message}", path = .path.display())]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}", path = .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] seqadv::error::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for malformed configuration or input, 3 for infeasible or
    /// degenerate games, 4 for I/O failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use seqadv::error::Error as E;
        match self {
            CliError::ConfigLine { .. } | CliError::Config(_) | CliError::EmptyData(_) | CliError::Format { .. } => 2,
            CliError::Io { .. } => 4,
            CliError::Core(E::Infeasible(_) | E::DegenerateGame(_)) => 3,
            CliError::Core(E::Construction(_) | E::Shape(_) | E::Domain(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
