//! Line-oriented `key = value` files with `[section]` headers.
//!
//! Every typed config in the crate reads its section through [`Section`],
//! which rejects unknown keys and reports bad values by key name.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing config key '{0}'")]
    Missing(String),
    #[error("config key '{key}': cannot use '{value}': {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("unknown config key '{0}'")]
    Unknown(String),
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config file: {0}")]
    Io(#[from] std::io::Error),
}

/// Parsed file: section name (empty for the preamble) to key/value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let entry = sections.entry(name.unwrap_or("").to_string()).or_default();
            for (k, v) in props.iter() {
                entry.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        sections.retain(|_, v| !v.is_empty());
        Ok(ConfigFile { sections })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn section(&self, name: &str) -> Section {
        let values = self.sections.get(name).cloned().unwrap_or_default();
        Section { name: name.to_string(), values }
    }

    /// Keys of `name` plus any preamble keys, for single-purpose files.
    pub fn section_or_root(&self, name: &str) -> Section {
        let mut s = self.section(name);
        if let Some(pre) = self.sections.get("") {
            for (k, v) in pre {
                s.values.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        s
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }
}

pub struct Section {
    name: String,
    values: BTreeMap<String, String>,
}

impl Section {
    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Overwrites `*slot` when `key` is present.
    pub fn read<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.values.get(key) {
            *slot = v.parse().map_err(|e: T::Err| ConfigError::Invalid {
                key: self.qualified(key),
                value: v.clone(),
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self
            .values
            .get(key)
            .ok_or_else(|| ConfigError::Missing(self.qualified(key)))?;
        v.parse().map_err(|e: T::Err| ConfigError::Invalid {
            key: self.qualified(key),
            value: v.clone(),
            reason: e.to_string(),
        })
    }

    /// Fails on the first key not in `known`.
    pub fn only(&self, known: &[&str], also_allowed: &[&str]) -> Result<(), ConfigError> {
        match self
            .values
            .keys()
            .find(|k| !known.contains(&k.as_str()) && !also_allowed.contains(&k.as_str()))
        {
            Some(k) => Err(ConfigError::Unknown(self.qualified(k))),
            None => Ok(()),
        }
    }

    pub fn invalid(&self, key: &str, value: impl ToString, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: self.qualified(key),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}

/// Renders `(key, value)` pairs under a section header.
pub fn render_section(name: &str, pairs: &[(&str, String)]) -> String {
    let mut s = format!("[{name}]\n");
    for (k, v) in pairs {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}
