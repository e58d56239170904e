//! Per-head attention shares of the query position over the instruction,
//! image and text blocks, for one sample in each input setting.

use modality_heads::data::{generate_corpus, CorpusSpec};
use modality_heads::heads::per_sample_shares;
use modality_heads::model::{build_sequence, forward_trace, HeadMask, Model, ModelConfig, Setting};

fn main() -> modality_heads::Result<()> {
    let cfg = ModelConfig { n_layers: 2, n_query_heads: 4, ..Default::default() };
    let model = Model::init(cfg, 3);
    let sample = generate_corpus(&CorpusSpec { n_train: 1, n_test: 0, ..Default::default() })?.train.remove(0);

    for setting in Setting::ALL {
        let seq = build_sequence(&sample, setting)?;
        let trace = forward_trace(&model, None, &seq, &HeadMask::none())?;
        println!("{setting}: {} tokens, query at {}", seq.len(), seq.query_position);
        for (i, [ins, img, txt]) in per_sample_shares(&trace, &seq)?.into_iter().enumerate() {
            println!("  L{}H{}  ins={ins:.3} img={img:.3} text={txt:.3}", i / 4, i % 4);
        }
    }
    Ok(())
}
