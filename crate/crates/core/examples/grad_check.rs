//! Finite-difference check of the adapter gradient of task loss plus the
//! share penalty, on a tiny model.

use modality_heads::autodiff::Graph;
use modality_heads::data::{generate_corpus, CorpusSpec};
use modality_heads::gradcheck::grad_check;
use modality_heads::heads::{HeadAssignments, HeadId, ScoredHead};
use modality_heads::hms::{lower_bound_loss, HmsConfig};
use modality_heads::model::{build_sequence, forward_graph, AdapterSet, AdapterVars, HeadMask, Model, ModelConfig, Stage};
use modality_heads::tensor::Tensor;

fn main() -> modality_heads::Result<()> {
    let cfg = ModelConfig { n_layers: 1, n_query_heads: 2, n_kv_heads: 1, head_dim: 4, ffn_dim: 8, vocab_size: 40, max_seq_len: 24, adapter_rank: 2 };
    let spec = CorpusSpec { n_train: 2, n_test: 0, img_len: 3, txt_len: 3, vocab_size: 40, ..Default::default() };
    let sample = generate_corpus(&spec)?.train.remove(0);
    let model = Model::init(cfg.clone(), 1);
    let mut adapters = AdapterSet::init(&cfg, 1);
    // Nonzero up factors so every adapter path carries gradient.
    adapters.layers[0].q_up = Tensor::full(&[2, 8], 0.05);
    adapters.layers[0].o_up = Tensor::full(&[2, 8], -0.05);

    let scored = |layer, head| ScoredHead { head: HeadId { layer, head }, score: 0.0 };
    let assignments = HeadAssignments { img: vec![scored(0, 0)], txt: vec![scored(0, 1)], k: 1, source: "example".into() };
    let hms = HmsConfig { tau: 0.9, lambda_lb: 1.0 };
    let seq = build_sequence(&sample, Stage::Multi.setting())?;

    let params: Vec<Tensor> = adapters.layers[0].tensors().into_iter().cloned().collect();
    let report = grad_check(
        |g: &mut Graph<'_>, vars| {
            let mv = model.params.register_cloned(g);
            let av = AdapterVars { layers: vec![[vars[0], vars[1], vars[2], vars[3]]] };
            let gt = forward_graph(g, &cfg, &mv, Some(&av), &seq, &HeadMask::none(), false)?;
            let task = g.cross_entropy(gt.logits, &[sample.y.answer_id()])?;
            let lb = lower_bound_loss(g, &cfg, &[(&gt, &seq)], &assignments, &hms, Stage::Multi)?;
            let lb = g.scale(lb, hms.lambda_lb);
            g.add(task, lb)
        },
        &params,
        1e-5,
        1e-3,
    )?;
    for (name, err) in ["q_down", "q_up", "o_down", "o_up"].iter().zip(&report.max_rel_error) {
        println!("{name:7} max_rel_error={err:.3e}");
    }
    println!("passed={}", report.passed());
    Ok(())
}
