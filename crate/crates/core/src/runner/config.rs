//! Flat `key = value` configuration with optional `[section]` prefixes.
//!
//! ```text
//! # circle experiment at desk scale
//! experiment = circle
//! mode = hmm
//! [micro]
//! points_per_eps = 8
//! ```
//!
//! Keys inside a section are stored as `section.key`. Later assignments
//! replace earlier ones.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

/// Resolved key-value pairs in sorted order.
pub type ConfigMap = BTreeMap<String, String>;

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("unterminated section header '{line}'") })?;
            let name = name.trim();
            if !name.is_empty() && !valid_key(name) {
                return Err(Error::Parse { line: line_no, msg: format!("invalid section name '{name}'") });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = split_assignment(line).map_err(|msg| Error::Parse { line: line_no, msg })?;
        let full = if section.is_empty() { key } else { format!("{section}.{key}") };
        map.insert(full, value);
    }
    Ok(map)
}

fn split_assignment(line: &str) -> std::result::Result<(String, String), String> {
    let (key, value) = line.split_once('=').ok_or_else(|| format!("expected 'key = value', got '{line}'"))?;
    let key = key.trim();
    if !valid_key(key) {
        return Err(format!("invalid key '{key}'"));
    }
    let value = value.trim();
    if value.is_empty() {
        return Err(format!("key '{key}' has an empty value"));
    }
    Ok((key.to_string(), value.to_string()))
}

/// Reads and parses a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses one command-line `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    split_assignment(s.trim()).map_err(|msg| Error::Config(format!("override: {msg}")))
}

/// Renders a map in the format accepted by [`parse_config`].
pub fn render_config(map: &ConfigMap) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Typed access to a map, recording which keys were consumed.
pub(crate) struct Reader<'a> {
    map: &'a ConfigMap,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
    resolved: std::cell::RefCell<ConfigMap>,
}

impl<'a> Reader<'a> {
    pub fn new(map: &'a ConfigMap) -> Self {
        Self { map, used: Default::default(), resolved: Default::default() }
    }

    /// Records the effective value of a key, including defaults.
    pub fn record(&self, key: &str, value: impl std::fmt::Display) {
        self.resolved.borrow_mut().insert(key.to_string(), value.to_string());
    }

    /// Every key read so far with its effective value.
    pub fn resolved(&self) -> ConfigMap {
        self.resolved.borrow().clone()
    }

    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.record(key, &v);
        v
    }

    /// Parses a key; the recorded value is the literal text, or `default` rendered.
    pub fn parse<T: std::str::FromStr + std::fmt::Display>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => {
                self.record(key, &default);
                Ok(default)
            }
            Some(v) => {
                self.record(key, v);
                v.parse().map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'")))
            }
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.parse(key, default)?;
        if !v.is_finite() {
            return Err(Error::Config(format!("key '{key}' must be finite")));
        }
        Ok(v)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        let v = match self.raw(key) {
            None => default,
            Some("true" | "yes" | "on" | "1") => true,
            Some("false" | "no" | "off" | "0") => false,
            Some(v) => return Err(Error::Config(format!("key '{key}': expected a boolean, got '{v}'"))),
        };
        self.record(key, v);
        Ok(v)
    }

    /// Fails on keys that were never read, which catches typos.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self.map.keys().filter(|k| !used.contains(k.as_str())).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}
