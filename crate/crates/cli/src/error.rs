use std::fmt;

use eit_core::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DOMAIN: u8 = 2;
pub const EXIT_CLAIM: u8 = 3;
pub const EXIT_RANK: u8 = 4;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self { code: EXIT_DOMAIN, message: message.into() }
    }

    pub fn claim(message: impl Into<String>) -> Self {
        Self { code: EXIT_CLAIM, message: message.into() }
    }
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_USAGE,
        Error::Csv(c) if c.is_io_error() => EXIT_USAGE,
        Error::RankDeficient { .. } => EXIT_RANK,
        Error::Injection { source, .. } => code_for(source),
        _ => EXIT_DOMAIN,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { code: code_for(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Writes a file, naming the path on failure.
pub fn write_file(path: &str, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::usage(format!("cannot write {path}: {e}")))
}

pub fn read_file(path: &str) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {path}: {e}")))
}
