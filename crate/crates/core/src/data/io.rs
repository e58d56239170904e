use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::SyntheticSample;
use crate::error::{Error, Result};

/// One JSON object per line: `id`, `img`, `txt`, `y`, and optionally
/// `y_img` / `y_txt` (absent means hidden).
pub fn write_corpus(path: &Path, samples: &[SyntheticSample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_corpus(text: impl BufRead, path: &Path) -> Result<Vec<SyntheticSample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: SyntheticSample = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        out.push(sample);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<SyntheticSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), path)
}
