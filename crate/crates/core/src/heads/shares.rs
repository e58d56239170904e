use crate::data::SyntheticSample;
use crate::error::{Error, Result};
use crate::model::{
    build_sequence, forward_trace, AdapterSet, ForwardTrace, Group, HeadId, HeadMask, Model,
    Setting, TokenSequence,
};

/// Attention mass of each head's query-position row over the three token
/// groups, as `[ins, img, text]`, indexed by `layer * n_heads + head`.
pub fn per_sample_shares(trace: &ForwardTrace, seq: &TokenSequence) -> Result<Vec<[f64; 3]>> {
    trace
        .attention_rows
        .iter()
        .map(|row| {
            if row.len() != seq.group_tags.len() {
                return Err(Error::Shape(format!(
                    "attention row of {} vs {} tagged positions",
                    row.len(),
                    seq.group_tags.len()
                )));
            }
            let mut s = [0.0; 3];
            for (&p, &tag) in row.iter().zip(&seq.group_tags) {
                s[tag.index()] += p;
            }
            Ok(s)
        })
        .collect()
}

/// Dataset-mean shares per head.
#[derive(Clone, Debug, PartialEq)]
pub struct ShareTable {
    pub n_layers: usize,
    pub n_heads: usize,
    pub means: Vec<[f64; 3]>,
    pub count: usize,
}

impl ShareTable {
    pub fn get(&self, id: HeadId, group: Group) -> f64 {
        self.means[id.layer * self.n_heads + id.head][group.index()]
    }

    pub fn heads(&self) -> impl Iterator<Item = HeadId> + '_ {
        (0..self.n_layers).flat_map(move |l| (0..self.n_heads).map(move |h| HeadId::new(l, h)))
    }

    pub fn total_heads(&self) -> usize {
        self.n_layers * self.n_heads
    }

    /// Mean of a group's share over the given heads.
    pub fn mean_over(&self, heads: &[HeadId], group: Group) -> f64 {
        heads.iter().map(|&h| self.get(h, group)).sum::<f64>() / heads.len().max(1) as f64
    }
}

/// Arithmetic mean of per-sample shares over `data` under `setting`.
pub fn aggregate_shares(
    model: &Model,
    adapters: Option<&AdapterSet>,
    data: &[SyntheticSample],
    setting: Setting,
) -> Result<ShareTable> {
    if data.is_empty() {
        return Err(Error::invalid("aggregate_shares needs at least one sample"));
    }
    let cfg = &model.config;
    let mut sums = vec![[0.0; 3]; cfg.total_heads()];
    let mask = HeadMask::none();
    for s in data {
        let seq = build_sequence(s, setting)?;
        let trace = forward_trace(model, adapters, &seq, &mask)?;
        for (acc, sh) in sums.iter_mut().zip(per_sample_shares(&trace, &seq)?) {
            for g in 0..3 {
                acc[g] += sh[g];
            }
        }
    }
    let n = data.len() as f64;
    Ok(ShareTable {
        n_layers: cfg.n_layers,
        n_heads: cfg.n_query_heads,
        means: sums.into_iter().map(|s| [s[0] / n, s[1] / n, s[2] / n]).collect(),
        count: data.len(),
    })
}
