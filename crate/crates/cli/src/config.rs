//! `key = value` config files: one assignment per line, `#` comments, keys
//! mirroring the CLI flag names. Flags always override config values.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Config {
    /// key → (line number, value); repeatable keys keep every occurrence.
    entries: HashMap<String, Vec<(usize, String)>>,
    path: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut entries: HashMap<String, Vec<(usize, String)>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`, found `{raw}`", path.display(), i + 1);
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                bail!("{}:{}: empty key or value", path.display(), i + 1);
            }
            entries.entry(key).or_default().push((i + 1, value));
        }
        Ok(Config { entries, path: path.display().to_string() })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.last()).map(|(_, s)| s.as_str())
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .get(key)
            .map(|v| v.iter().map(|(_, s)| s.as_str()).collect())
            .unwrap_or_default()
    }

    /// Parse the last occurrence of `key`, reporting the config line on error.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key).and_then(|v| v.last()) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|e| {
                anyhow::anyhow!("{}:{line}: cannot parse `{value}` for `{key}`: {e}", self.path)
            }),
        }
    }
}

/// Comma-separated list of numbers (`25,50,100`).
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} entry `{t}`: {e}")))
        .collect()
}
