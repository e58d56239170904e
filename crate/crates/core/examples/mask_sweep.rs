//! Masks the top image heads of a small trained model and compares the
//! image-only macro F1 drop against masking the same number of random heads.

use modality_heads::data::CorpusSpec;
use modality_heads::heads::mask_sweep;
use modality_heads::model::{ModelConfig, Setting};
use modality_heads::pipeline::{finetune, prepare_base, ExperimentConfig};
use modality_heads::training::{PretrainConfig, RunConfig};

fn main() -> modality_heads::Result<()> {
    let cfg = ExperimentConfig {
        corpus: CorpusSpec { n_train: 200, n_test: 100, ..Default::default() },
        model: ModelConfig { n_layers: 2, n_query_heads: 4, ffn_dim: 64, ..Default::default() },
        pretrain: PretrainConfig { steps: 60, batch_size: 8, ..Default::default() },
        run: RunConfig { k: 4, epochs: 2, eval_each_epoch: false, ..Default::default() },
    };
    let base = prepare_base(&cfg)?;
    let trained = finetune(&base, &cfg.run)?;
    for setting in [Setting::ImgOnly, Setting::TextOnly] {
        let rows = mask_sweep(&base.model, Some(&trained.adapters), &base.corpus.test, &base.top, &[0, 2, 4], 5, setting, 0)?;
        println!("{setting}");
        for r in rows {
            println!("  k={} ranked={:.3} random={:.3}±{:.3}", r.k, r.ranked_f1, r.random_f1_mean, r.random_f1_std);
        }
    }
    Ok(())
}
