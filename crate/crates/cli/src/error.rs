use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config key `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error(transparent)]
    Core(#[from] horizon_walk_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
