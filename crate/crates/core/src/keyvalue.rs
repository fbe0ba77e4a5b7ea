//! Flat `key = value` files with `[section]` headers.
//!
//! Shared by sweep configs, phantom descriptions and CLI run configs.
//! Sections and keys keep file order; `#` starts a comment line. Keys seen
//! before any header belong to the unnamed section `""`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// Source line, 0 for entries set programmatically.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueFile {
    sections: Vec<Section>,
}

impl KeyValueFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.section(name).is_some()
    }

    pub fn entries(&self, section: &str) -> &[Entry] {
        self.section(section).map_or(&[], |s| s.entries.as_slice())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entries.iter().find(|e| e.key == key)
    }

    /// Parses `section.key` into `T`, reporting the source line on failure.
    pub fn parse_value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| Error::Format {
                line: e.line,
                message: format!("[{section}] {key}: cannot parse `{}`", e.value),
            }),
        }
    }

    /// Inserts or overwrites a value, creating the section if needed.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let value = value.into();
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let sec = &mut self.sections[idx];
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => sec.entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
    }
}

impl FromStr for KeyValueFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut file = KeyValueFile::default();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Format {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                current = name.trim().to_string();
                if file.has_section(&current) {
                    return Err(Error::Format {
                        line: line_no,
                        message: format!("section [{current}] repeated"),
                    });
                }
                file.sections.push(Section {
                    name: current.clone(),
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Format {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if file.entry(&current, key).is_some() {
                return Err(Error::Format {
                    line: line_no,
                    message: format!("key `{key}` repeated in [{current}]"),
                });
            }
            if !file.has_section(&current) {
                file.sections.push(Section {
                    name: current.clone(),
                    entries: Vec::new(),
                });
            }
            let section = file
                .sections
                .iter_mut()
                .find(|s| s.name == current)
                .expect("section just ensured");
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(file)
    }
}

impl fmt::Display for KeyValueFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            if !s.name.is_empty() || i > 0 {
                writeln!(f, "[{}]", s.name)?;
            }
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let text = "top = 1\n# note\n[model]\nsigma0 = 2.5\n tau=1e-3 \n[frequencies]\nf0 = 10\n";
        let kv: KeyValueFile = text.parse().unwrap();
        assert_eq!(kv.get("", "top"), Some("1"));
        assert_eq!(kv.get("model", "tau"), Some("1e-3"));
        assert_eq!(kv.parse_value::<f64>("model", "sigma0").unwrap(), Some(2.5));
        assert_eq!(kv.entries("frequencies").len(), 1);
        assert!(kv.entries("missing").is_empty());
    }

    #[test]
    fn reports_line_numbers() {
        let err = "[a]\nx = 1\ny\n".parse::<KeyValueFile>().unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }));
        let err = "[a]\nx = 1\nx = 2\n".parse::<KeyValueFile>().unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }));
        let kv: KeyValueFile = "[a]\nx = nope\n".parse().unwrap();
        assert!(matches!(
            kv.parse_value::<f64>("a", "x"),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn set_overrides_and_display_round_trips() {
        let mut kv: KeyValueFile = "[run]\nseed = 1\n".parse().unwrap();
        kv.set("run", "seed", "9");
        kv.set("mesh", "refine", "2");
        let text = kv.to_string();
        assert_eq!(text, "[run]\nseed = 9\n\n[mesh]\nrefine = 2\n");
        let back: KeyValueFile = text.parse().unwrap();
        assert_eq!(back.get("run", "seed"), Some("9"));
        assert_eq!(back.get("mesh", "refine"), Some("2"));
    }
}
