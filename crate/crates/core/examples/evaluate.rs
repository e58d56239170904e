//! Three-setting macro-F1 report for a model, with and without heads masked.

use modality_heads::data::{generate_corpus, CorpusSpec};
use modality_heads::eval::{evaluate, evaluate_masked, macro_f1};
use modality_heads::model::{HeadId, HeadMask, Model, ModelConfig, Setting};
use modality_heads::tokens::Label;

fn main() -> modality_heads::Result<()> {
    // The textbook case: 3 of 5 REAL and 8 of 10 FAKE right.
    let golds: Vec<Label> = [vec![Label::Real; 5], vec![Label::Fake; 10]].concat();
    let mut preds = golds.clone();
    preds[3] = Label::Fake;
    preds[4] = Label::Fake;
    preds[5] = Label::Real;
    preds[6] = Label::Real;
    println!("worked example macro_f1={:.4}", macro_f1(&preds, &golds)?);

    let cfg = ModelConfig { n_layers: 2, n_query_heads: 4, ffn_dim: 64, ..Default::default() };
    let model = Model::init(cfg.clone(), 7);
    let test = generate_corpus(&CorpusSpec { n_train: 1, n_test: 100, ..Default::default() })?.test;
    print!("{}", evaluate(&model, None, &test, &Setting::ALL)?.to_text());
    let mask = HeadMask::new(&cfg, [HeadId { layer: 0, head: 0 }, HeadId { layer: 1, head: 2 }])?;
    println!("with two heads masked:");
    print!("{}", evaluate_masked(&model, None, &mask, &test, &Setting::ALL)?.to_text());
    Ok(())
}
