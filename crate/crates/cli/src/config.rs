//! Flag/file resolution and the reproducibility header.

use std::fmt::Display;
use std::str::FromStr;

use eit_core::keyvalue::KeyValueFile;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Resolved parameters for one command. Explicit flags win over values
/// from the `--config` file, which win over defaults. Every resolved value
/// is recorded for the output header.
pub struct RunConfig {
    file: Option<KeyValueFile>,
    section: &'static str,
    command: &'static str,
    seed: u64,
    resolved: Vec<(String, String)>,
}

impl RunConfig {
    pub fn new(
        config: Option<&str>,
        seed: Option<u64>,
        command: &'static str,
        section: &'static str,
    ) -> CliResult<Self> {
        let file = match config {
            None => None,
            Some(path) => Some(
                KeyValueFile::load(path).map_err(|e| match e {
                    eit_core::Error::Io(io) => CliError::usage(format!("cannot read {path}: {io}")),
                    other => other.into(),
                })?,
            ),
        };
        let mut cfg = Self { file, section, command, seed: 0, resolved: Vec::new() };
        let from_file = cfg.file_value::<u64>("run", "seed")?;
        cfg.seed = seed.or(from_file).unwrap_or(0);
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn file_value<T: FromStr>(&self, section: &str, key: &str) -> CliResult<Option<T>> {
        match &self.file {
            None => Ok(None),
            Some(kv) => Ok(kv.parse_value(section, key)?),
        }
    }

    /// Flag, then config file, then nothing.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(self.section, key)?,
        };
        if let Some(v) = &value {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(value)
    }

    pub fn with_default<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(self.section, key)?.unwrap_or(default),
        };
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<T> {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::usage(format!("--{key} is required")))
    }

    /// Records a derived value for the header.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Header lines without comment markers; writers add their own.
    pub fn header(&self) -> Vec<String> {
        let mut lines = vec![
            format!("eit {VERSION}"),
            format!("command: {}", self.command),
            format!("seed = {}", self.seed),
        ];
        lines.extend(self.resolved.iter().map(|(k, v)| format!("{k} = {v}")));
        lines
    }

    pub fn print_header(&self) {
        for line in self.header() {
            println!("# {line}");
        }
    }
}
