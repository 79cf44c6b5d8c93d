use std::fmt;

use serde::Serialize;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Structured failure reported as JSON on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub exit_code: i32,
}

impl CliError {
    pub fn config(code: &str, message: impl Into<String>) -> Self {
        Self { code: format!("config.{code}"), message: message.into(), exit_code: EXIT_USAGE }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: "usage.invalid_arguments".into(), message: message.into(), exit_code: EXIT_USAGE }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Envelope<'a> {
            schema: &'static str,
            error: &'a CliError,
        }
        serde_json::to_string(&Envelope { schema: crate::output::SCHEMA, error: self }).expect("error serializes")
    }
}

impl From<eecop_core::Error> for CliError {
    fn from(e: eecop_core::Error) -> Self {
        let exit_code = if e.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE };
        Self { code: e.code().to_string(), message: e.to_string(), exit_code }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}
