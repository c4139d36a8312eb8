//! CLI error wrapper: every failure carries a machine-readable code and an
//! exit class (2 = invalid input, 1 = internal).

use std::fmt;
use std::path::Path;

pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.to_string(),
            message: message.into(),
            exit: 2,
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: "Internal".to_string(),
            message: message.into(),
            exit: 1,
        }
    }

    /// Output-side IO failures are internal, not input validation.
    pub fn write(path: &Path, err: impl fmt::Display) -> Self {
        CliError::internal(format!("failed to write {}: {err}", path.display()))
    }
}

impl From<cranioface_core::Error> for CliError {
    fn from(e: cranioface_core::Error) -> Self {
        CliError {
            code: e.code().to_string(),
            message: e.to_string(),
            exit: 2,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
