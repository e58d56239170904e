//! Lower-bound attention-share penalty on modality-critical heads.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::heads::HeadAssignments;
use crate::model::{GraphTrace, Group, HeadId, ModelConfig, Stage, TokenSequence};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmsConfig {
    /// Minimum share a critical head should keep on its modality.
    pub tau: f64,
    pub lambda_lb: f64,
}

impl Default for HmsConfig {
    fn default() -> Self {
        Self { tau: 0.4, lambda_lb: 1.0 }
    }
}

impl HmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.lambda_lb >= 0.0 && self.lambda_lb.is_finite()) {
            return Err(Error::invalid(format!("lambda_lb must be >= 0, got {}", self.lambda_lb)));
        }
        Ok(())
    }
}

/// Groups whose critical heads are constrained in `stage`.
pub fn constrained_groups(stage: Stage) -> &'static [Group] {
    match stage {
        Stage::Img => &[Group::Img],
        Stage::Text => &[Group::Text],
        Stage::Multi => &[Group::Img, Group::Text],
    }
}

fn group_heads(a: &HeadAssignments, group: Group) -> Vec<HeadId> {
    a.for_group(group).iter().map(|s| s.head).collect()
}

/// Batch mean of the per-sample penalty. Per sample and group, the penalty
/// is the mean over that group's critical heads of `max(0, tau - share)`,
/// where `share` is the head's query-row attention on the group's block;
/// the MULTI stage adds the image and text terms.
pub fn lower_bound_loss(
    g: &mut Graph<'_>,
    model_cfg: &ModelConfig,
    batch: &[(&GraphTrace, &TokenSequence)],
    assignments: &HeadAssignments,
    cfg: &HmsConfig,
    stage: Stage,
) -> Result<Var> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::invalid("lower-bound loss of an empty batch"));
    }
    let groups: Vec<(Group, Vec<HeadId>)> = constrained_groups(stage)
        .iter()
        .map(|&grp| (grp, group_heads(assignments, grp)))
        .filter(|(_, h)| !h.is_empty())
        .collect();
    for (_, heads) in &groups {
        for &h in heads {
            model_cfg.check_head(h)?;
        }
    }
    let mut per_sample = Vec::with_capacity(batch.len());
    for (trace, seq) in batch {
        if seq.setting != stage.setting() {
            return Err(Error::invalid(format!("{} sequence in the {stage} stage", seq.setting)));
        }
        if trace.attn_rows.len() != model_cfg.total_heads() {
            return Err(Error::Shape(format!(
                "trace has {} attention rows, model has {} heads",
                trace.attn_rows.len(),
                model_cfg.total_heads()
            )));
        }
        let mut terms = Vec::with_capacity(groups.len());
        for (grp, heads) in &groups {
            let block = seq.block(*grp);
            let mut hinges = Vec::with_capacity(heads.len());
            for &h in heads {
                let row = trace.attn_rows[model_cfg.head_index(h)];
                let part = g.slice_cols(row, block.start, block.end)?;
                let share = g.sum(part);
                hinges.push(g.hinge(share, cfg.tau));
            }
            let total = g.add_n(&hinges)?;
            terms.push(g.scale(total, 1.0 / heads.len() as f64));
        }
        per_sample.push(match terms.len() {
            0 => g.constant(Tensor::scalar(0.0)),
            1 => terms[0],
            _ => g.add_n(&terms)?,
        });
    }
    let total = g.add_n(&per_sample)?;
    Ok(g.scale(total, 1.0 / batch.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticSample;
    use crate::gradcheck::grad_check;
    use crate::heads::ScoredHead;
    use crate::model::{build_sequence, forward_graph, HeadMask, Model, Setting};
    use crate::tokens::Label;

    fn cfg2() -> ModelConfig {
        ModelConfig { n_layers: 1, n_query_heads: 2, n_kv_heads: 1, head_dim: 2, ffn_dim: 4, vocab_size: 32, max_seq_len: 32, adapter_rank: 1 }
    }

    fn sample() -> SyntheticSample {
        SyntheticSample { id: 0, img_tokens: vec![16, 19], txt_tokens: vec![24, 27], y: Label::Fake, y_img: Some(Label::Real), y_txt: Some(Label::Fake) }
    }

    fn assign(img: &[(usize, usize)], txt: &[(usize, usize)]) -> HeadAssignments {
        let f = |v: &[(usize, usize)]| v.iter().map(|&(l, h)| ScoredHead { head: HeadId::new(l, h), score: 0.0 }).collect();
        HeadAssignments { img: f(img), txt: f(txt), k: img.len(), source: "test".into() }
    }

    /// Rows of length 9 (MULTI layout with 2+2 modality tokens) whose image
    /// block (positions 3..5) carries `img_share`.
    fn row_with_img_share(img_share: f64) -> Tensor {
        let rest = (1.0 - img_share) / 7.0;
        let mut d = vec![rest; 9];
        d[3] = img_share / 2.0;
        d[4] = img_share / 2.0;
        Tensor::new(vec![1, 9], d).unwrap()
    }

    #[test]
    fn worked_example() {
        let seq = build_sequence(&sample(), Setting::Multi).unwrap();
        let mut g = Graph::new();
        let rows = vec![g.param(row_with_img_share(0.25)), g.param(row_with_img_share(0.5))];
        let logits = g.constant(Tensor::zeros(&[1, 32]));
        let trace = GraphTrace { logits, attn_rows: rows };
        let a = assign(&[(0, 0), (0, 1)], &[]);
        let hms = HmsConfig { tau: 0.4, lambda_lb: 1.0 };
        let l = lower_bound_loss(&mut g, &cfg2(), &[(&trace, &seq)], &a, &hms, Stage::Img);
        // the sequence is MULTI, so the IMG stage must refuse it
        assert!(l.is_err());
        let l = lower_bound_loss(&mut g, &cfg2(), &[(&trace, &seq)], &a, &hms, Stage::Multi).unwrap();
        assert!((g.value(l).item() - 0.075).abs() < 1e-15);
    }

    #[test]
    fn inactive_hinge_gives_zero_loss_and_gradient() {
        let seq = build_sequence(&sample(), Setting::Multi).unwrap();
        let mut g = Graph::new();
        let rows = vec![g.param(row_with_img_share(0.6)), g.param(row_with_img_share(0.9))];
        let logits = g.constant(Tensor::zeros(&[1, 32]));
        let trace = GraphTrace { logits, attn_rows: rows.clone() };
        let a = assign(&[(0, 0), (0, 1)], &[]);
        let l = lower_bound_loss(&mut g, &cfg2(), &[(&trace, &seq)], &a, &HmsConfig::default(), Stage::Multi).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        g.backward(l).unwrap();
        for r in rows {
            assert!(g.grad(r).is_none_or(|t| t.data().iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn gradient_only_reaches_constrained_heads() {
        let seq = build_sequence(&sample(), Setting::Multi).unwrap();
        let mut g = Graph::new();
        let rows = vec![g.param(row_with_img_share(0.1)), g.param(row_with_img_share(0.1))];
        let logits = g.constant(Tensor::zeros(&[1, 32]));
        let trace = GraphTrace { logits, attn_rows: rows.clone() };
        let a = assign(&[(0, 1)], &[]);
        let l = lower_bound_loss(&mut g, &cfg2(), &[(&trace, &seq)], &a, &HmsConfig::default(), Stage::Multi).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(rows[0]).is_none_or(|t| t.data().iter().all(|&v| v == 0.0)));
        assert!(g.grad(rows[1]).unwrap().data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn raising_tau_never_lowers_loss() {
        let model = Model::init(cfg2(), 5);
        let seq = build_sequence(&sample(), Setting::Multi).unwrap();
        let a = assign(&[(0, 0)], &[(0, 1)]);
        let mut last = -1.0;
        for tau in [0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
            let mut g = Graph::new();
            let mv = model.params.register(&mut g, false);
            let gt = forward_graph(&mut g, &model.config, &mv, None, &seq, &HeadMask::none(), false).unwrap();
            let hms = HmsConfig { tau, lambda_lb: 1.0 };
            let l = lower_bound_loss(&mut g, &model.config, &[(&gt, &seq)], &a, &hms, Stage::Multi).unwrap();
            let v = g.value(l).item();
            assert!(v >= last && v >= 0.0);
            last = v;
        }
    }

    #[test]
    fn unimodal_stage_skips_the_other_group() {
        let model = Model::init(cfg2(), 5);
        let seq = build_sequence(&sample(), Setting::TextOnly).unwrap();
        let a = assign(&[(0, 0)], &[]);
        let mut g = Graph::new();
        let mv = model.params.register(&mut g, false);
        let gt = forward_graph(&mut g, &model.config, &mv, None, &seq, &HeadMask::none(), false).unwrap();
        let l = lower_bound_loss(&mut g, &model.config, &[(&gt, &seq)], &a, &HmsConfig::default(), Stage::Text).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn matches_finite_differences_through_the_model() {
        let model = Model::init(cfg2(), 8);
        let seq = build_sequence(&sample(), Setting::Multi).unwrap();
        let a = assign(&[(0, 0), (0, 1)], &[(0, 1)]);
        let hms = HmsConfig { tau: 0.9, lambda_lb: 1.0 };
        let params: Vec<Tensor> = vec![model.params.layers[0].wq.clone(), model.params.layers[0].wk.clone()];
        let report = grad_check(
            |g, vars| {
                let mut mv = model.params.register_cloned(g);
                mv.layers[0].wq = vars[0];
                mv.layers[0].wk = vars[1];
                let gt = forward_graph(g, &model.config, &mv, None, &seq, &HeadMask::none(), false)?;
                lower_bound_loss(g, &model.config, &[(&gt, &seq)], &a, &hms, Stage::Multi)
            },
            &params,
            1e-5,
            1e-3,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }
}
