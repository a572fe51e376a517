//! Experiment config files: `key = value` lines that mirror the CLI flags.
//! A flag given on the command line wins over the config value; everything a
//! command needs may come from either side. No environment variables are
//! consulted anywhere.

use std::collections::BTreeMap;

use crate::format::ParseError;

/// Keys a config file may define, matching the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "machine", "machines", "direction", "construct", "k", "eps", "seq", "n", "n-grid", "s-grid",
    "k-grid", "horizon", "budget", "suite", "out", "export", "seed", "max-len", "depth",
];

#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl ExperimentConfig {
    pub fn empty() -> Self {
        ExperimentConfig::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(l, _)| *l)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ParseError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseError { line: Some(i + 1), message: "expected `key = value`".into() });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(ParseError {
                line: Some(i + 1),
                message: format!("unknown key {key:?}"),
            });
        }
        if entries.insert(key.to_string(), (i + 1, value.to_string())).is_some() {
            return Err(ParseError {
                line: Some(i + 1),
                message: format!("duplicate key {key:?}"),
            });
        }
    }
    Ok(ExperimentConfig { entries })
}
