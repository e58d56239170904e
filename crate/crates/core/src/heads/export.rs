use std::path::Path;

use super::{rank_heads, ShareTable};
use crate::error::{Error, Result};
use crate::model::Group;
use crate::provenance::{csv_comment, csv_rows, write_csv};

/// One row per layer, one column per head, holding the `group` share.
pub fn export_heatmap(table: &ShareTable, group: Group, path: &Path, fingerprint: &str) -> Result<()> {
    let header: Vec<String> =
        std::iter::once("layer".to_string()).chain((0..table.n_heads).map(|h| format!("h{h}"))).collect();
    let rows: Vec<String> = (0..table.n_layers)
        .map(|l| {
            let mut r = l.to_string();
            for h in 0..table.n_heads {
                r.push(',');
                r.push_str(&table.means[l * table.n_heads + h][group.index()].to_string());
            }
            r
        })
        .collect();
    write_csv(path, fingerprint, &format!("# group={group}\n{}", header.join(",")), &rows)
}

/// The `top_n` largest `group` shares, non-increasing.
pub fn ranked_curve(table: &ShareTable, group: Group, top_n: usize) -> Vec<f64> {
    rank_heads(table, group).into_iter().take(top_n).map(|s| s.score).collect()
}

/// Ranked curves of several labelled tables side by side: columns
/// `rank,<label>...`.
pub fn export_ranked_curve(
    tables: &[(String, &ShareTable)],
    group: Group,
    top_n: usize,
    path: &Path,
    fingerprint: &str,
) -> Result<()> {
    if tables.is_empty() {
        return Err(Error::invalid("no tables to export"));
    }
    let curves: Vec<Vec<f64>> = tables.iter().map(|(_, t)| ranked_curve(t, group, top_n)).collect();
    let n = curves.iter().map(Vec::len).min().unwrap_or(0);
    let header: Vec<&str> = std::iter::once("rank").chain(tables.iter().map(|(l, _)| l.as_str())).collect();
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let mut r = (i + 1).to_string();
            for c in &curves {
                r.push(',');
                r.push_str(&c[i].to_string());
            }
            r
        })
        .collect();
    write_csv(path, fingerprint, &format!("# group={group}\n{}", header.join(",")), &rows)
}

/// Columns `layer,head,ins,img,text`; the sample count travels in a comment.
pub fn write_share_table(path: &Path, table: &ShareTable, fingerprint: &str) -> Result<()> {
    let rows: Vec<String> = table
        .heads()
        .zip(&table.means)
        .map(|(id, m)| format!("{},{},{},{},{}", id.layer, id.head, m[0], m[1], m[2]))
        .collect();
    write_csv(path, fingerprint, &format!("# count={}\nlayer,head,ins,img,text", table.count), &rows)
}

pub fn read_share_table(path: &Path) -> Result<ShareTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut means = Vec::new();
    let mut n_layers = 0;
    let mut n_heads = 0;
    for (line, cols) in csv_rows(&text) {
        let bad = |msg: &str| Error::Parse { line, msg: msg.to_string() };
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let l: usize = cols[0].parse().map_err(|_| bad("bad layer"))?;
        let h: usize = cols[1].parse().map_err(|_| bad("bad head"))?;
        if l == 0 {
            n_heads = n_heads.max(h + 1);
        }
        if h >= n_heads.max(1) || l * n_heads + h != means.len() {
            return Err(bad("rows must list heads in (layer, head) order"));
        }
        n_layers = l + 1;
        let mut m = [0.0; 3];
        for (g, slot) in m.iter_mut().enumerate() {
            *slot = cols[2 + g].parse().map_err(|_| bad("bad share"))?;
        }
        means.push(m);
    }
    if means.is_empty() || means.len() != n_layers * n_heads {
        return Err(Error::invalid("share table is empty or ragged"));
    }
    let count = csv_comment(&text, "count").and_then(|c| c.parse().ok()).unwrap_or(0);
    Ok(ShareTable { n_layers, n_heads, means, count })
}
