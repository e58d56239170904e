use rand::seq::SliceRandom;

use super::optim::AdamW;
use super::ukr::{protected_mask, shrink_gradients, UkrConfig};
use crate::autodiff::{Graph, Var};
use crate::data::SyntheticSample;
use crate::error::{Error, Result};
use crate::eval::gold_for;
use crate::heads::HeadAssignments;
use crate::hms::{constrained_groups, lower_bound_loss, HmsConfig};
use crate::model::{build_sequence, forward_graph, AdapterSet, AdapterVars, GraphTrace, HeadMask, Model, Stage, TokenSequence};
use crate::rng;
use crate::tensor::Tensor;
use crate::tokens::Label;

/// Per-batch training record.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLog {
    pub task_loss: f64,
    pub lb_loss: f64,
    /// Mean share of the stage's constrained heads on their own modality.
    pub constrained_share: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageLog {
    pub stage: Stage,
    pub batches: Vec<BatchLog>,
    pub n_samples: usize,
}

impl StageLog {
    pub fn skipped(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn mean_task_loss(&self) -> Option<f64> {
        self.mean(|b| b.task_loss)
    }

    pub fn mean_lb_loss(&self) -> Option<f64> {
        self.mean(|b| b.lb_loss)
    }

    fn mean(&self, f: impl Fn(&BatchLog) -> f64) -> Option<f64> {
        (!self.batches.is_empty()).then(|| self.batches.iter().map(f).sum::<f64>() / self.batches.len() as f64)
    }
}

/// Everything a stage needs besides the data and the weights.
#[derive(Clone, Copy, Debug)]
pub struct StageSettings<'a> {
    pub assignments: &'a HeadAssignments,
    pub hms: HmsConfig,
    pub ukr: UkrConfig,
    pub batch_size: usize,
    pub seed: u64,
}

/// The stage's label for `sample`: `y_img`, `y_txt` or `y`.
pub fn stage_label(sample: &SyntheticSample, stage: Stage) -> Option<Label> {
    gold_for(sample, stage.setting())
}

/// Forward pass of a batch under the stage's setting with the loss terms
/// attached. Returns `(loss, task, lb, traces)`; the penalty only joins
/// the loss when `lambda_lb > 0`.
fn batch_graph<'p>(
    g: &mut Graph<'p>,
    model: &'p Model,
    adapters: &'p AdapterSet,
    batch: &[&SyntheticSample],
    stage: Stage,
    s: &StageSettings<'_>,
) -> Result<(Var, Var, Var, Vec<(GraphTrace, TokenSequence)>, AdapterVars)> {
    let mv = model.params.register(g, false);
    let av = adapters.register(g, true);
    let mask = HeadMask::none();
    let mut traced = Vec::with_capacity(batch.len());
    let mut ces = Vec::with_capacity(batch.len());
    for sample in batch {
        let label = stage_label(sample, stage)
            .ok_or_else(|| Error::invalid(format!("sample {} has no {stage} label", sample.id)))?;
        let seq = build_sequence(sample, stage.setting())?;
        let gt = forward_graph(g, &model.config, &mv, Some(&av), &seq, &mask, false)?;
        ces.push(g.cross_entropy(gt.logits, &[label.answer_id()])?);
        traced.push((gt, seq));
    }
    let total = g.add_n(&ces)?;
    let task = g.scale(total, 1.0 / batch.len() as f64);
    let pairs: Vec<(&GraphTrace, &TokenSequence)> = traced.iter().map(|(t, q)| (t, q)).collect();
    let lb = lower_bound_loss(g, &model.config, &pairs, s.assignments, &s.hms, stage)?;
    let loss = if s.hms.lambda_lb > 0.0 {
        let weighted = g.scale(lb, s.hms.lambda_lb);
        g.add(task, weighted)?
    } else {
        task
    };
    Ok((loss, task, lb, traced, av))
}

fn constrained_share(g: &Graph<'_>, model: &Model, traced: &[(GraphTrace, TokenSequence)], stage: Stage, a: &HeadAssignments) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (gt, seq) in traced {
        for &group in constrained_groups(stage) {
            let block = seq.block(group);
            for s in a.for_group(group) {
                let row = g.value(gt.attn_rows[model.config.head_index(s.head)]);
                total += row.data()[block.clone()].iter().sum::<f64>();
                n += 1;
            }
        }
    }
    (n > 0).then(|| total / n as f64)
}

/// One optimizer step of the stage objective on `batch`.
pub fn train_step(
    model: &Model,
    adapters: &mut AdapterSet,
    opt: &mut AdamW,
    batch: &[&SyntheticSample],
    stage: Stage,
    s: &StageSettings<'_>,
) -> Result<BatchLog> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (mut grads, log) = {
        let mut g = Graph::new();
        let (loss, task, lb, traced, vars) = batch_graph(&mut g, model, adapters, batch, stage, s)?;
        g.backward(loss)?;
        let grads = adapters.grads_from(&g, &vars);
        let log = BatchLog {
            task_loss: g.value(task).item(),
            lb_loss: g.value(lb).item(),
            constrained_share: constrained_share(&g, model, &traced, stage, s.assignments),
        };
        (grads, log)
    };
    let n_heads = model.config.n_query_heads;
    shrink_gradients(&mut grads, n_heads, s.assignments, stage, &s.ukr)?;
    let frozen = if s.ukr.gamma == 0.0 {
        Some(protected_mask(adapters, n_heads, s.assignments, stage)?)
    } else {
        None
    };
    let grad_refs: Vec<&Tensor> = grads.named().into_iter().map(|(_, t)| t).collect();
    let mut params: Vec<&mut Tensor> = adapters.named_mut().into_iter().map(|(_, t)| t).collect();
    opt.step(&mut params, &grad_refs, frozen.as_deref())?;
    Ok(log)
}

/// Value of the stage objective on `batch` without updating anything.
pub fn stage_loss(
    model: &Model,
    adapters: &AdapterSet,
    batch: &[&SyntheticSample],
    stage: Stage,
    s: &StageSettings<'_>,
) -> Result<f64> {
    let mut g = Graph::new();
    let (loss, ..) = batch_graph(&mut g, model, adapters, batch, stage, s)?;
    Ok(g.value(loss).item())
}

/// One shuffled pass over `data` in batches. Every sample must carry the
/// stage's label; this is checked before any update.
pub fn train_stage(
    model: &Model,
    adapters: &mut AdapterSet,
    opt: &mut AdamW,
    stage: Stage,
    data: &[SyntheticSample],
    s: &StageSettings<'_>,
    epoch: usize,
) -> Result<StageLog> {
    if s.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if let Some(bad) = data.iter().find(|x| stage_label(x, stage).is_none()) {
        return Err(Error::invalid(format!("sample {} lacks the {stage} label", bad.id)));
    }
    let mut order: Vec<&SyntheticSample> = data.iter().collect();
    order.shuffle(&mut rng::stream(s.seed, &[0x57A6E, epoch as u64, stage as u64]));
    let mut batches = Vec::with_capacity(order.len().div_ceil(s.batch_size));
    for chunk in order.chunks(s.batch_size) {
        batches.push(train_step(model, adapters, opt, chunk, stage, s)?);
    }
    Ok(StageLog { stage, batches, n_samples: data.len() })
}
