use crate::error::{Error, Result};
use crate::heads::HeadAssignments;
use crate::model::{AdapterSet, Group, HeadId, Stage};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UkrConfig {
    /// Multiplier on protected heads' gradient blocks; 0 freezes them.
    pub gamma: f64,
}

impl Default for UkrConfig {
    fn default() -> Self {
        Self { gamma: 0.7 }
    }
}

impl UkrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Critical heads whose modality differs from the stage's. A head in both
/// lists is protected once, not twice.
pub fn protected_heads(assignments: &HeadAssignments, stage: Stage) -> Vec<HeadId> {
    let mut out: Vec<HeadId> = Vec::new();
    for group in [Group::Img, Group::Text] {
        if stage.matches(group) {
            continue;
        }
        for s in assignments.for_group(group) {
            if !out.contains(&s.head) {
                out.push(s.head);
            }
        }
    }
    out
}

fn head_width(t: &Tensor, n_heads: usize, along_cols: bool) -> Result<usize> {
    let (rows, cols) = t.dims2();
    let axis = if along_cols { cols } else { rows };
    if n_heads == 0 || axis % n_heads != 0 {
        return Err(Error::Shape(format!("{:?} does not split into {n_heads} head blocks", t.shape())));
    }
    Ok(axis / n_heads)
}

/// Flat indices of `head`'s block: columns of the query up-factor, rows
/// of the output down-factor.
fn block_indices(t: &Tensor, n_heads: usize, head: usize, along_cols: bool) -> Result<Vec<usize>> {
    let w = head_width(t, n_heads, along_cols)?;
    let (rows, cols) = t.dims2();
    Ok(if along_cols {
        (0..rows).flat_map(|r| (head * w..(head + 1) * w).map(move |c| r * cols + c)).collect()
    } else {
        (head * w * cols..(head + 1) * w * cols).collect()
    })
}

fn check_heads(grads: &AdapterSet, n_heads: usize, heads: &[HeadId]) -> Result<()> {
    for l in &grads.layers {
        head_width(&l.q_up, n_heads, true)?;
        head_width(&l.o_down, n_heads, false)?;
    }
    if let Some(h) = heads.iter().find(|h| h.layer >= grads.layers.len() || h.head >= n_heads) {
        return Err(Error::invalid(format!("protected head {h} outside the adapter set")));
    }
    Ok(())
}

/// Scales the head-indexed gradient blocks of protected heads by `gamma`.
/// The rank-side factors (`q_down`, `o_up`) are shared by all heads and
/// pass through unchanged.
pub fn shrink_gradients(
    grads: &mut AdapterSet,
    n_query_heads: usize,
    assignments: &HeadAssignments,
    stage: Stage,
    ukr: &UkrConfig,
) -> Result<()> {
    ukr.validate()?;
    let heads = protected_heads(assignments, stage);
    check_heads(grads, n_query_heads, &heads)?;
    if ukr.gamma == 1.0 {
        return Ok(());
    }
    for h in heads {
        let layer = &mut grads.layers[h.layer];
        for i in block_indices(&layer.q_up, n_query_heads, h.head, true)? {
            layer.q_up.data_mut()[i] *= ukr.gamma;
        }
        for i in block_indices(&layer.o_down, n_query_heads, h.head, false)? {
            layer.o_down.data_mut()[i] *= ukr.gamma;
        }
    }
    Ok(())
}

/// Per-tensor element masks, in [`AdapterSet::named`] order, marking the
/// protected blocks. Used to hold them exactly still when `gamma == 0`.
pub fn protected_mask(
    adapters: &AdapterSet,
    n_query_heads: usize,
    assignments: &HeadAssignments,
    stage: Stage,
) -> Result<Vec<Vec<bool>>> {
    let heads = protected_heads(assignments, stage);
    check_heads(adapters, n_query_heads, &heads)?;
    let mut masks: Vec<Vec<bool>> = adapters.named().iter().map(|(_, t)| vec![false; t.len()]).collect();
    for h in heads {
        let l = &adapters.layers[h.layer];
        let base = h.layer * 4;
        for i in block_indices(&l.q_up, n_query_heads, h.head, true)? {
            masks[base + 1][i] = true;
        }
        for i in block_indices(&l.o_down, n_query_heads, h.head, false)? {
            masks[base + 2][i] = true;
        }
    }
    Ok(masks)
}
