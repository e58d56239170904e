//! Generates a corpus, hides unimodal labels outside a 1% budget and
//! scores the cue-reading rule, which sits at the Bayes ceiling.

use modality_heads::data::{apply_budget, generate_corpus, Budget, CorpusSpec};
use modality_heads::eval::{cue_rule_predict, evaluate_with};
use modality_heads::model::Setting;
use modality_heads::tokens::Vocab;

fn main() -> modality_heads::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = CorpusSpec { seed, ..Default::default() };
    let corpus = generate_corpus(&spec)?;
    let budgeted = apply_budget(&corpus.train, Budget::uniform(0.01), seed)?;
    let revealed = |f: fn(&modality_heads::data::SyntheticSample) -> bool| budgeted.iter().filter(|s| f(s)).count();
    println!(
        "train={} test={} revealed_img={} revealed_txt={}",
        corpus.train.len(),
        corpus.test.len(),
        revealed(|s| s.y_img.is_some()),
        revealed(|s| s.y_txt.is_some())
    );
    let first = &corpus.train[0];
    println!("sample 0: img={:?} txt={:?} y={} y_img={:?} y_txt={:?}", first.img_tokens, first.txt_tokens, first.y, first.y_img, first.y_txt);

    let vocab = Vocab::new(spec.vocab_size)?;
    let report = evaluate_with(&corpus.test, &Setting::ALL, |s, setting| cue_rule_predict(s, setting, &vocab))?;
    print!("{}", report.to_text());
    Ok(())
}
