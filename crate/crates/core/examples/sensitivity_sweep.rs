//! Small grid over the share bound and the gradient shrink factor.

use modality_heads::data::CorpusSpec;
use modality_heads::model::{ModelConfig, Setting};
use modality_heads::pipeline::{finetune, prepare_base, ExperimentConfig};
use modality_heads::training::{PretrainConfig, RunConfig};

fn main() -> modality_heads::Result<()> {
    let cfg = ExperimentConfig {
        corpus: CorpusSpec { n_train: 150, n_test: 80, ..Default::default() },
        model: ModelConfig { n_layers: 2, n_query_heads: 4, ffn_dim: 64, ..Default::default() },
        pretrain: PretrainConfig { steps: 40, batch_size: 8, ..Default::default() },
        run: RunConfig { k: 2, epochs: 1, eval_each_epoch: false, ..Default::default() },
    };
    let base = prepare_base(&cfg)?;
    println!("tau,gamma,f1_multi,f1_img_only,f1_text_only");
    for tau in [0.2, 0.6] {
        for gamma in [0.0, 0.7] {
            let mut run = cfg.run.clone();
            run.hms.tau = tau;
            run.ukr.gamma = gamma;
            let report = finetune(&base, &run)?.final_report.expect("test split");
            let f = |s| report.f1(s).unwrap_or(f64::NAN);
            println!("{tau},{gamma},{:.4},{:.4},{:.4}", f(Setting::Multi), f(Setting::ImgOnly), f(Setting::TextOnly));
        }
    }
    Ok(())
}
