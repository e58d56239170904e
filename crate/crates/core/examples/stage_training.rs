//! Stage-wise adapter finetuning (image, text, multimodal per epoch) on a
//! small pretrained base, full method against the naive baseline.

use modality_heads::data::CorpusSpec;
use modality_heads::model::ModelConfig;
use modality_heads::pipeline::{finetune, prepare_base, ExperimentConfig};
use modality_heads::training::{Ablation, PretrainConfig, RunConfig};

fn main() -> modality_heads::Result<()> {
    let cfg = ExperimentConfig {
        corpus: CorpusSpec { n_train: 200, n_test: 100, ..Default::default() },
        model: ModelConfig { n_layers: 2, n_query_heads: 4, ffn_dim: 64, ..Default::default() },
        pretrain: PretrainConfig { steps: 60, batch_size: 8, ..Default::default() },
        run: RunConfig { k: 2, epochs: 2, budget: modality_heads::data::Budget::uniform(0.1), ..Default::default() },
    };
    let base = prepare_base(&cfg)?;
    for ablation in [Ablation::None, Ablation::Naive] {
        let out = finetune(&base, &RunConfig { ablation, ..cfg.run.clone() })?;
        println!("{ablation}");
        for row in &out.history {
            let f1 = row.f1.map(|f| format!(" f1 multi={:.3} img={:.3} text={:.3}", f[0].unwrap_or(0.0), f[1].unwrap_or(0.0), f[2].unwrap_or(0.0)));
            println!(
                "  epoch {} {:5} n={:3} task={:.4} lb={:.4}{}",
                row.epoch,
                row.stage.to_string(),
                row.n_samples,
                row.mean_task_loss.unwrap_or(f64::NAN),
                row.mean_lb_loss.unwrap_or(f64::NAN),
                f1.unwrap_or_default()
            );
        }
    }
    Ok(())
}
