//! Config fingerprints stamped into every CSV artifact.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// First 16 hex digits of the SHA-256 of `config_text`.
pub fn fingerprint(config_text: &str) -> String {
    let digest = Sha256::digest(config_text.as_bytes());
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

/// Comment line + header line + rows.
pub fn write_csv(path: &Path, fingerprint: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut text = format!("# config_fingerprint={fingerprint}\n{header}\n");
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Data lines of a CSV written by [`write_csv`], with their 1-based line
/// numbers; comments and the header are skipped.
pub fn csv_rows(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect()
}

/// Value of a `# key=value` comment line, if present.
pub fn csv_comment<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim().split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}
