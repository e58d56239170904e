//! The share lower-bound penalty on hand-made attention rows: only heads
//! below the bound contribute, and only their rows receive gradient.

use modality_heads::autodiff::Graph;
use modality_heads::data::{generate_corpus, CorpusSpec};
use modality_heads::heads::{HeadAssignments, HeadId, ScoredHead};
use modality_heads::hms::{lower_bound_loss, HmsConfig};
use modality_heads::model::{build_sequence, GraphTrace, Group, ModelConfig, Setting, Stage};
use modality_heads::tensor::Tensor;

/// An attention row putting `img` of the mass on the image block, `txt` on
/// the text block and the rest on the instruction tokens.
fn row(groups: &[Group], img: f64, txt: f64) -> Vec<f64> {
    let count = |want| groups.iter().filter(|&&g| g == want).count() as f64;
    let ins = 1.0 - img - txt;
    groups
        .iter()
        .map(|g| match g {
            Group::Img => img / count(Group::Img),
            Group::Text => txt / count(Group::Text),
            Group::Ins => ins / count(Group::Ins),
        })
        .collect()
}

fn main() -> modality_heads::Result<()> {
    let cfg = ModelConfig { n_layers: 1, n_query_heads: 2, n_kv_heads: 1, ..Default::default() };
    let spec = CorpusSpec { n_train: 1, n_test: 0, img_len: 2, txt_len: 2, ..Default::default() };
    let sample = generate_corpus(&spec)?.train.remove(0);
    let seq = build_sequence(&sample, Setting::Multi)?;
    let head = |h| ScoredHead { head: HeadId { layer: 0, head: h }, score: 0.0 };
    let a = HeadAssignments { img: vec![head(0), head(1)], txt: vec![head(0)], k: 2, source: "example".into() };
    let shares = [(0.25, 0.6), (0.6, 0.2)];

    for tau in [0.2, 0.4, 0.6] {
        let mut g = Graph::new();
        let attn_rows: Vec<_> = shares
            .iter()
            .map(|&(img, txt)| g.param(Tensor::new(vec![1, seq.len()], row(&seq.group_tags, img, txt)).unwrap()))
            .collect();
        let logits = g.constant(Tensor::zeros(&[1, cfg.vocab_size]));
        let trace = GraphTrace { logits, attn_rows: attn_rows.clone() };
        let loss = lower_bound_loss(&mut g, &cfg, &[(&trace, &seq)], &a, &HmsConfig { tau, lambda_lb: 1.0 }, Stage::Multi)?;
        g.backward(loss)?;
        println!("tau={tau} loss={:.4}", g.value(loss).item());
        for (h, &r) in attn_rows.iter().enumerate() {
            let grad = g.grad(r).map(|t| t.data().to_vec()).unwrap_or_default();
            let nonzero = grad.iter().filter(|v| **v != 0.0).count();
            println!("  head {h}: img={} text={} nonzero grad entries={nonzero}", shares[h].0, shares[h].1);
        }
    }
    Ok(())
}
