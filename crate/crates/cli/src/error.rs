use std::fmt;

use rdjoint_core::{Error as CoreError, ErrorClass};
use serde::Serialize;

/// Process exit status for each error family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad flags, schema, file or config.
    Usage,
    Estimation,
    Inference,
}

impl ExitKind {
    pub fn status(self) -> u8 {
        match self {
            ExitKind::Usage => 2,
            ExitKind::Estimation => 3,
            ExitKind::Inference => 4,
        }
    }
}

/// Error with a stable code, reported as JSON on standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub kind: ExitKind,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.to_string(),
            message: message.into(),
            kind: ExitKind::Usage,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error payload serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match e.class() {
            ErrorClass::Input => ExitKind::Usage,
            ErrorClass::Estimation => ExitKind::Estimation,
            ErrorClass::Inference => ExitKind::Inference,
        };
        CliError {
            code: e.code().to_string(),
            message: e.to_string(),
            kind,
        }
    }
}
