//! Flat `key = value` configuration files with dotted keys.
//!
//! Blank lines and `#` comments are allowed. Every key must be consumed by
//! the section parsers; leftovers are reported as unknown keys so typos
//! fail loudly.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    consumed: std::collections::BTreeSet<String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {raw:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "empty key".into(),
                });
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate key {key}"),
                });
            }
        }
        Ok(Self {
            values,
            consumed: Default::default(),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<&str> {
        if self.values.contains_key(key) {
            self.consumed.insert(key.to_string());
            self.values.get(key).map(|s| s.as_str())
        } else {
            None
        }
    }

    pub fn get_str(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or(default).to_string()
    }

    pub fn get_opt_str(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|s| s.to_string())
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    pub fn get_u64(&mut self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn get_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn get_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn get_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(Error::InvalidConfig(format!(
                "key {key}: expected a boolean, got {other:?}"
            ))),
        }
    }

    pub fn get_f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("key {key}: cannot parse {t:?}")))
                })
                .collect(),
        }
    }

    pub fn get_usize_list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("key {key}: cannot parse {t:?}")))
                })
                .collect(),
        }
    }

    /// Keys with a given prefix that have not been consumed yet.
    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.values
            .keys()
            .filter(|k| k.starts_with(prefix) && !self.consumed.contains(*k))
            .cloned()
            .collect()
    }

    /// Error out on any key no section parser claimed.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&String> = self
            .values
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            let names: Vec<String> = unknown.iter().map(|s| s.to_string()).collect();
            Err(Error::InvalidConfig(format!("unknown keys: {}", names.join(", "))))
        }
    }
}
