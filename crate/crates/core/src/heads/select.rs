use std::path::Path;

use super::ShareTable;
use crate::error::{Error, Result};
use crate::model::{Group, HeadId};
use crate::provenance::{csv_comment, csv_rows, write_csv};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredHead {
    pub head: HeadId,
    pub score: f64,
}

/// Image- and text-critical head lists, each sorted by score descending.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadAssignments {
    pub img: Vec<ScoredHead>,
    pub txt: Vec<ScoredHead>,
    pub k: usize,
    pub source: String,
}

impl HeadAssignments {
    pub fn img_heads(&self) -> Vec<HeadId> {
        self.img.iter().map(|s| s.head).collect()
    }

    pub fn txt_heads(&self) -> Vec<HeadId> {
        self.txt.iter().map(|s| s.head).collect()
    }

    pub fn for_group(&self, group: Group) -> &[ScoredHead] {
        match group {
            Group::Img => &self.img,
            Group::Text => &self.txt,
            Group::Ins => &[],
        }
    }

    /// Heads appearing in both lists.
    pub fn shared(&self) -> Vec<HeadId> {
        let txt = self.txt_heads();
        self.img.iter().map(|s| s.head).filter(|h| txt.contains(h)).collect()
    }
}

/// Every head sorted by its `group` share, descending, ties by
/// `(layer, head)` ascending.
pub fn rank_heads(table: &ShareTable, group: Group) -> Vec<ScoredHead> {
    let mut all: Vec<ScoredHead> =
        table.heads().map(|head| ScoredHead { head, score: table.get(head, group) }).collect();
    all.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.head.cmp(&b.head)));
    all
}

fn check_k(table: &ShareTable, k: usize) -> Result<()> {
    if k > table.total_heads() {
        return Err(Error::invalid(format!("K = {k} exceeds {} heads", table.total_heads())));
    }
    Ok(())
}

pub fn select_top_k(table: &ShareTable, k: usize) -> Result<HeadAssignments> {
    check_k(table, k)?;
    let take = |g| rank_heads(table, g).into_iter().take(k).collect();
    Ok(HeadAssignments { img: take(Group::Img), txt: take(Group::Text), k, source: "top".into() })
}

/// The `k` lowest-scoring heads per modality, lowest first.
pub fn select_bottom_k(table: &ShareTable, k: usize) -> Result<HeadAssignments> {
    check_k(table, k)?;
    let take = |g| {
        let mut r = rank_heads(table, g);
        r.reverse();
        r.into_iter().take(k).collect()
    };
    Ok(HeadAssignments { img: take(Group::Img), txt: take(Group::Text), k, source: "bottom".into() })
}

/// Columns `modality,rank,layer,head,score`; the source tag travels in a
/// comment line.
pub fn write_assignments(path: &Path, a: &HeadAssignments, fingerprint: &str) -> Result<()> {
    let mut rows = Vec::new();
    for (name, list) in [("img", &a.img), ("text", &a.txt)] {
        for (rank, s) in list.iter().enumerate() {
            rows.push(format!("{name},{},{},{},{}", rank + 1, s.head.layer, s.head.head, s.score));
        }
    }
    let header = format!("source={}\nmodality,rank,layer,head,score", a.source);
    write_csv(path, fingerprint, &format!("# {header}"), &rows)
}

pub fn read_assignments(path: &Path) -> Result<HeadAssignments> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut img = Vec::new();
    let mut txt = Vec::new();
    for (line, cols) in csv_rows(&text) {
        let bad = |msg: &str| Error::Parse { line, msg: msg.to_string() };
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let num = |i: usize| cols[i].parse::<usize>().map_err(|_| bad("bad integer"));
        let head = HeadId::new(num(2)?, num(3)?);
        let score = cols[4].parse::<f64>().map_err(|_| bad("bad score"))?;
        let list = match cols[0] {
            "img" => &mut img,
            "text" => &mut txt,
            _ => return Err(bad("modality must be img or text")),
        };
        if num(1)? != list.len() + 1 {
            return Err(bad("ranks must be consecutive from 1"));
        }
        list.push(ScoredHead { head, score });
    }
    if img.len() != txt.len() {
        return Err(Error::invalid("image and text lists differ in length"));
    }
    let source = csv_comment(&text, "source").unwrap_or("unknown").to_string();
    Ok(HeadAssignments { k: img.len(), img, txt, source })
}
