use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("ParseError at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{}: {}", .0.name(), .0)]
    Domain(#[from] qbayes::Error),
    #[error("Invalid: {0}")]
    Invalid(String),
    #[error("EmptyRunDir: no summaries in {0}")]
    EmptyRunDir(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn unknown(what: &str, name: &str) -> Self {
        CliError::Invalid(format!("unknown {what} {name:?}"))
    }

    pub fn missing(param: &str, command: &str) -> Self {
        CliError::Usage(format!("{command} needs run.{param} (or the matching flag)"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            _ => 1,
        }
    }
}
