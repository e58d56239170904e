//! Pretrains a small base, ranks heads by modality share and compares the
//! image ranking under multimodal and image-only inputs.

use modality_heads::data::{generate_corpus, CorpusSpec};
use modality_heads::heads::{aggregate_shares, overlap_stats, select_top_k};
use modality_heads::model::{Model, ModelConfig, Setting};
use modality_heads::training::{pretrain_base, PretrainConfig};

fn main() -> modality_heads::Result<()> {
    let cfg = ModelConfig { n_layers: 2, n_query_heads: 4, ffn_dim: 64, ..Default::default() };
    let corpus = generate_corpus(&CorpusSpec { n_train: 200, n_test: 0, ..Default::default() })?;
    let mut model = Model::init(cfg, 0);
    let losses = pretrain_base(&mut model, &corpus.train, &PretrainConfig { steps: 60, batch_size: 8, ..Default::default() })?;
    println!("pretrain loss {:.3} -> {:.3}", losses[0], losses[losses.len() - 1]);

    let multi = aggregate_shares(&model, None, &corpus.train, Setting::Multi)?;
    let img_only = aggregate_shares(&model, None, &corpus.train, Setting::ImgOnly)?;
    let k = 2;
    let top = select_top_k(&multi, k)?;
    let top_img_only = select_top_k(&img_only, k)?;
    for s in &top.img {
        println!("image head {} share={:.3}", s.head, s.score);
    }
    for s in &top.txt {
        println!("text head  {} share={:.3}", s.head, s.score);
    }
    let stats = overlap_stats(&top.img, &top_img_only.img)?;
    println!("image heads, multi vs image-only: overlap={} jaccard={:.3} mean_delta={:?}", stats.overlap, stats.jaccard, stats.mean_delta);
    Ok(())
}
