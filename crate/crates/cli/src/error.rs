use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected input: unknown key, malformed value, empty grid, bad atom count.
    #[error("config error: {message}")]
    Config { key: String, message: String },

    /// A computation failed or produced nothing usable.
    #[error("{command}: {message}")]
    Numeric { command: String, message: String },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn numeric(command: impl ToString, message: impl Into<String>) -> Self {
        CliError::Numeric {
            command: command.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Library errors are attributed to the input when they describe it.
    pub fn from_core(command: impl ToString, err: twistlab::Error) -> Self {
        use twistlab::Error as E;
        match err {
            E::AtomCount { .. } | E::TooManyAtoms { .. } | E::Grid(_) | E::Inconsistent(_) => CliError::Config {
                key: command.to_string(),
                message: format!("{}: {err}", command.to_string()),
            },
            E::OutOfRange { name, .. } => CliError::Config {
                key: name.to_string(),
                message: format!("{}: {err}", command.to_string()),
            },
            other => CliError::numeric(command, other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }
}
