use std::fmt;
use std::path::Path;

use serde_json::json;

/// Exit status for bad inputs, flags or configuration.
pub const EXIT_USER: i32 = 1;
/// Exit status for failures of the computation itself.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    pub fn user(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
            exit: EXIT_USER,
        }
    }

    pub fn runtime(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
            exit: EXIT_RUNTIME,
        }
    }

    pub fn missing(flag: &str) -> Self {
        Self::user("InvalidConfig", format!("missing required option --{flag}"))
    }

    pub fn malformed(path: &Path, message: impl fmt::Display) -> Self {
        Self::user("MalformedInput", format!("{}: {message}", path.display()))
    }

    pub fn write_failed(path: &Path, e: std::io::Error) -> Self {
        Self::runtime("IoFailure", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

impl From<modal_align::Error> for CliError {
    fn from(e: modal_align::Error) -> Self {
        Self {
            code: e.code().to_owned(),
            message: e.to_string(),
            exit: if e.is_user_error() { EXIT_USER } else { EXIT_RUNTIME },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
