use thiserror::Error;

/// Failures of the command-line layer. Input errors map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("object `{name}` is a {found}, expected a {expected}")]
    WrongKind {
        name: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("duplicate object name `{0}`")]
    DuplicateObject(String),

    #[error("object `{name}`: {message}")]
    Object { name: String, message: String },

    #[error("task {index} ({op}): {message}")]
    Task { index: usize, op: String, message: String },

    #[error("builtin `{name}`: {message}")]
    Builtin { name: String, message: String },

    #[error("invalid tolerance: {0}")]
    Tolerance(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] waylab_core::Error),
}

impl CliError {
    pub fn object(name: &str, err: impl std::fmt::Display) -> Self {
        CliError::Object {
            name: name.to_string(),
            message: err.to_string(),
        }
    }

    pub fn builtin(name: &str, message: impl Into<String>) -> Self {
        CliError::Builtin {
            name: name.to_string(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
