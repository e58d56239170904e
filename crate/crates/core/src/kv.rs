//! Line-oriented `key=value` config files. `#` starts a comment line.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse { line: i + 1, msg: format!("duplicate key {key:?}") });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Rejects any key outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::Parse { line: *line, msg: format!("unknown key {k:?}") });
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                msg: format!("bad value for {key}: {v:?}"),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|_| Error::Parse {
                        line: *line,
                        msg: format!("bad list item for {key}: {s:?}"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}
