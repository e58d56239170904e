use super::ScoredHead;
use crate::error::{Error, Result};

/// Agreement between two equal-size top-K head sets. Deltas are
/// `score_b - score_a` on the shared heads (later setting minus earlier).
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapStats {
    pub overlap: f64,
    pub jaccard: f64,
    pub deltas: Vec<f64>,
    pub mean_delta: Option<f64>,
    pub median_delta: Option<f64>,
}

/// Jaccard index of two size-K sets that share `overlap * K` members.
pub fn jaccard_from_overlap(overlap: f64) -> f64 {
    overlap / (2.0 - overlap)
}

pub fn overlap_stats(a: &[ScoredHead], b: &[ScoredHead]) -> Result<OverlapStats> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("head sets differ in size: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("overlap of empty head sets"));
    }
    let k = a.len();
    let deltas: Vec<f64> = a
        .iter()
        .filter_map(|x| b.iter().find(|y| y.head == x.head).map(|y| y.score - x.score))
        .collect();
    let shared = deltas.len();
    let union = 2 * k - shared;
    let mean_delta = (!deltas.is_empty()).then(|| deltas.iter().sum::<f64>() / shared as f64);
    let median_delta = (!deltas.is_empty()).then(|| {
        let mut s = deltas.clone();
        s.sort_by(f64::total_cmp);
        if shared % 2 == 1 {
            s[shared / 2]
        } else {
            (s[shared / 2 - 1] + s[shared / 2]) / 2.0
        }
    });
    Ok(OverlapStats {
        overlap: shared as f64 / k as f64,
        jaccard: shared as f64 / union as f64,
        deltas,
        mean_delta,
        median_delta,
    })
}
