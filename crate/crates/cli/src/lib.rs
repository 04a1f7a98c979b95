//! File formats and subcommands of the `diskreeb` driver.

pub mod commands;
pub mod config;
pub mod files;
pub mod suite;

use std::fmt;

use diskreeb_core::Error;

/// Exit code 2: the configuration cannot be run.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code 3: a numerical routine failed.
pub const EXIT_NUMERIC: u8 = 3;
/// Exit code 4: a verification check failed.
pub const EXIT_VERIFY: u8 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: msg.into() }
    }

    pub fn verification(msg: impl Into<String>) -> Self {
        Self { code: EXIT_VERIFY, message: msg.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ParameterOutOfRange(_) | Error::InvalidForm(_) | Error::HypothesisViolation(_) => {
                Failure::config(e.to_string())
            }
            _ => Failure::numeric(e.to_string()),
        }
    }
}
