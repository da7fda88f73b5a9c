//! Flat `key=value` configuration files.
//!
//! Every on-disk config in this project (turbine parameters, controller
//! settings, scenarios) uses the same line format so one parser serves all of
//! them: `#` starts a comment, blank lines are skipped, and each remaining
//! line must be `key=value` with a unique key. Values are kept as strings;
//! typed accessors convert on demand and name the offending key in errors.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    /// Line did not match `key=value`.
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    /// The same key appeared twice.
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    /// A required key is absent.
    #[error("missing required key {key:?}")]
    Missing { key: String },
    /// A value failed to parse as the requested type.
    #[error("key {key:?}: value {value:?} is not a valid {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
}

/// Parsed config file: an ordered key-to-string map plus typed accessors.
#[derive(Debug, Clone, Default)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    /// Parses the full text of a config file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Malformed {
                    line,
                    text: trimmed.to_string(),
                });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::Duplicate { line, key });
            }
            entries.insert(key, value);
        }
        Ok(KvMap { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Result<&str, ConfigError> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ConfigError::Missing {
                key: key.to_string(),
            })
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let raw = self.get_str(key)?;
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ConfigError::BadValue {
                key: key.to_string(),
                value: raw.to_string(),
                expected: "finite number",
            })
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let raw = self.get_str(key)?;
        raw.parse::<usize>().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: raw.to_string(),
            expected: "unsigned integer",
        })
    }

    /// Optional lookup: `Ok(None)` when the key is absent, an error only when
    /// it is present but malformed.
    pub fn get_f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        if self.contains(key) {
            self.get_f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Comma-separated list of numbers, e.g. `breaks=0.5,5,8.1,24`.
    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.get_str(key)?;
        let mut out = Vec::new();
        for part in raw.split(',') {
            let v = part
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ConfigError::BadValue {
                    key: key.to_string(),
                    value: raw.to_string(),
                    expected: "comma-separated list of finite numbers",
                })?;
            out.push(v);
        }
        Ok(out)
    }

    /// Keys in sorted order, for diagnostics and round-trip tests.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
