//! Plain-text `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! A `[section]` line prefixes the keys that follow with `section.`, so
//!
//! ```text
//! [scenario]
//! speed = 5.0
//! ```
//!
//! is the same as `scenario.speed = 5.0`. Duplicate keys are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::InvalidConfig(format!("line {}: empty key", lineno + 1)));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key `{full}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "on" | "yes" | "1") => Ok(true),
            Some("false" | "off" | "no" | "0") => Ok(false),
            Some(v) => Err(Error::InvalidConfig(format!("cannot parse `{key} = {v}` as a flag"))),
        }
    }

    /// Rejects keys outside `known`; catches typos that would otherwise
    /// silently fall back to defaults.
    pub fn check_known(&self, known: &BTreeSet<&str>) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("unknown keys: {}", unknown.join(", "))))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text form (sorted keys, no sections).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_prefix_keys() {
        let cfg = KvConfig::parse("a = 1\n[scenario]\nspeed = 5.5 # m/s\n\n[x]\ny=z\n").unwrap();
        assert_eq!(cfg.get::<i32>("a").unwrap(), Some(1));
        assert_eq!(cfg.get::<f64>("scenario.speed").unwrap(), Some(5.5));
        assert_eq!(cfg.raw("x.y"), Some("z"));
        assert_eq!(cfg.get::<f64>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_garbage() {
        assert!(KvConfig::parse("novalue\n").is_err());
        assert!(KvConfig::parse("a=1\na=2\n").is_err());
        let cfg = KvConfig::parse("a = abc").unwrap();
        assert!(cfg.get::<f64>("a").is_err());
    }

    #[test]
    fn unknown_keys_reported() {
        let cfg = KvConfig::parse("a = 1\nb = 2").unwrap();
        let known: BTreeSet<&str> = ["a"].into_iter().collect();
        assert!(cfg.check_known(&known).is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = KvConfig::parse("[s]\nk = v\nz = 1").unwrap();
        assert_eq!(KvConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
