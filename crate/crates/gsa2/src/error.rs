use std::path::PathBuf;

/// Failures of the command-line layer. Each maps to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Invalid or inconsistent configuration; `path` is the key path.
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file (CSV schema, unparsable cell).
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] gsa2_core::Error),
}

impl AppError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AppError::Format { path: path.into(), message: message.into() }
    }

    /// 2: configuration, 3: numerical degeneracy, 4: I/O and file format.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config { .. } => 2,
            AppError::Core(e) if e.is_numerical() => 3,
            AppError::Core(_) => 2,
            AppError::Io { .. } | AppError::Format { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numerical",
            _ => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
