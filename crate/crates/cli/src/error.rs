use std::fmt;
use std::io;

pub const EXIT_OK: u8 = 0;
/// Unexpected I/O failure while writing outputs.
pub const EXIT_IO: u8 = 1;
/// Bad flags, params, configs, traces or run directories.
pub const EXIT_INPUT: u8 = 2;
/// The policy failed to parse, validate or run.
pub const EXIT_POLICY: u8 = 3;
/// The model provider failed after retries.
pub const EXIT_PROVIDER: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn policy(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_POLICY,
            message: message.into(),
        }
    }

    pub fn provider(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_PROVIDER,
            message: message.into(),
        }
    }

    pub fn io(context: impl fmt::Display, e: io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{context}: {e}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
