//! Which adapter elements the retention rule shrinks in each stage.

use modality_heads::heads::{HeadAssignments, HeadId, ScoredHead};
use modality_heads::model::{AdapterSet, ModelConfig, Stage};
use modality_heads::tensor::Tensor;
use modality_heads::training::{protected_heads, shrink_gradients, UkrConfig};

fn main() -> modality_heads::Result<()> {
    let cfg = ModelConfig { n_layers: 1, n_query_heads: 4, n_kv_heads: 2, head_dim: 2, adapter_rank: 1, ..Default::default() };
    let head = |h| ScoredHead { head: HeadId { layer: 0, head: h }, score: 0.0 };
    let a = HeadAssignments { img: vec![head(0)], txt: vec![head(3)], k: 1, source: "example".into() };
    let ukr = UkrConfig { gamma: 0.5 };

    for stage in Stage::ORDER {
        let mut grads = AdapterSet::zeros(&cfg);
        for t in grads.layers[0].tensors_mut() {
            *t = Tensor::full(t.shape(), 1.0);
        }
        shrink_gradients(&mut grads, cfg.n_query_heads, &a, stage, &ukr)?;
        let heads: Vec<String> = protected_heads(&a, stage).iter().map(|h| h.to_string()).collect();
        println!("{stage}: protected [{}]", heads.join(" "));
        println!("  q_up   {:?}", grads.layers[0].q_up.data());
        println!("  o_down {:?}", grads.layers[0].o_down.data());
    }
    Ok(())
}
