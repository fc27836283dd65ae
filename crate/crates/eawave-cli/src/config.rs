//! Flat, sectioned key-value configuration documents.
//!
//! The format is a plain text file of `[section]` headers followed by
//! `key = value` lines; `#` starts a comment, blank lines are ignored.
//! Duplicate keys within a section are allowed and keep their order, which
//! is how repeated items (e.g. sensors) are expressed. Parsing followed by
//! serialization followed by parsing is the identity on the document.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: entry '{1}' appears before any [section] header")]
    EntryOutsideSection(usize, String),
    #[error("line {0}: expected 'key = value', got '{1}'")]
    MalformedLine(usize, String),
    #[error("line {0}: malformed section header '{1}'")]
    MalformedSection(usize, String),
    #[error("missing required section [{0}]")]
    MissingSection(String),
    #[error("missing required key '{0}' in section [{1}]")]
    MissingKey(String, String),
    #[error("invalid value '{2}' for '{1}' in section [{0}]: {3}")]
    InvalidValue(String, String, String, String),
}

/// One `[name]` section with its entries in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

/// A parsed configuration document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigDoc {
    pub sections: Vec<Section>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = ConfigDoc::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::MalformedSection(idx + 1, line.to_string()))?
                    .trim();
                if name.is_empty() {
                    return Err(ConfigError::MalformedSection(idx + 1, line.to_string()));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::MalformedLine(idx + 1, line.to_string()))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::MalformedLine(idx + 1, line.to_string()));
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| ConfigError::EntryOutsideSection(idx + 1, line.to_string()))?;
            section
                .entries
                .push((key.to_string(), value.trim().to_string()));
        }
        Ok(doc)
    }

    /// Canonical serialization; `parse(serialize(d)) == d`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", s.name);
            for (k, v) in &s.entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require_section(&self, name: &str) -> Result<&Section, ConfigError> {
        self.section(name)
            .ok_or_else(|| ConfigError::MissingSection(name.to_string()))
    }

    /// First value of `key` in `section`, if both exist.
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section)?.get(key)
    }

    /// All values of `key` in `section`, in file order.
    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.section(section)
            .map(|s| s.get_all(key))
            .unwrap_or_default()
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.require_section(section)?
            .get(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_string(), section.to_string()))
    }

    /// Typed accessor with a configurable default.
    pub fn get_parsed<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => parse_value(section, key, v),
        }
    }

    pub fn require_parsed<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        parse_value(section, key, self.require(section, key)?)
    }

    /// Whitespace-separated list value, e.g. `levels = 2 3 4`.
    pub fn get_list<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|tok| parse_value(section, key, tok))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }
}

fn parse_value<T: std::str::FromStr>(
    section: &str,
    key: &str,
    v: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| {
        ConfigError::InvalidValue(
            section.to_string(),
            key.to_string(),
            v.to_string(),
            e.to_string(),
        )
    })
}
