//! Macro F1 against Monte-Carlo and closed-form references on the corpus.

use modality_heads::data::{generate_corpus, CorpusSpec};
use modality_heads::eval::{cue_rule_predict, evaluate_with, gold_for, macro_f1};
use modality_heads::model::Setting;
use modality_heads::rng;
use modality_heads::tokens::{Label, Vocab};
use rand::Rng;

/// Macro F1 from the joint probabilities of (gold, pred) for the two classes.
fn macro_f1_from_joint(joint: [[f64; 2]; 2]) -> f64 {
    let f1 = |c: usize| {
        let tp = joint[c][c];
        let pred = joint[0][c] + joint[1][c];
        let gold = joint[c][0] + joint[c][1];
        2.0 * tp / (pred + gold)
    };
    (f1(0) + f1(1)) / 2.0
}

/// The cue rule on a corpus with cue reliabilities `a` (image) and `b`
/// (text): the unimodal rule is right with probability equal to the
/// reliability; the multimodal rule says REAL only when both cues do.
fn cue_rule_closed_form(a: f64, b: f64) -> [f64; 3] {
    let unimodal = |p: f64| macro_f1_from_joint([[0.5 * p, 0.5 * (1.0 - p)], [0.5 * (1.0 - p), 0.5 * p]]);
    let real_real = 0.25 * a * b;
    let fake_real = 0.25 * (a * (1.0 - b) + (1.0 - a) * b + (1.0 - a) * (1.0 - b));
    let multi = macro_f1_from_joint([[real_real, 0.25 - real_real], [fake_real, 0.75 - fake_real]]);
    [multi, unimodal(a), unimodal(b)]
}

#[test]
fn cue_rule_matches_closed_form() {
    let spec = CorpusSpec { n_train: 1, n_test: 40_000, seed: 3, ..Default::default() };
    let corpus = generate_corpus(&spec).unwrap();
    let vocab = Vocab::new(spec.vocab_size).unwrap();
    let report = evaluate_with(&corpus.test, &Setting::ALL, |s, setting| cue_rule_predict(s, setting, &vocab)).unwrap();
    let want = cue_rule_closed_form(spec.cue_img, spec.cue_txt);
    for (setting, w) in Setting::ALL.into_iter().zip(want) {
        let got = report.f1(setting).unwrap();
        assert!((got - w).abs() < 0.01, "{setting}: {got} vs closed form {w}");
    }
    assert!((want[0] - 0.7449).abs() < 1e-3);
    assert!((want[1] - 0.65).abs() < 1e-12 && (want[2] - 0.95).abs() < 1e-12);
}

#[test]
fn noiseless_corpus_cue_rule_is_perfect() {
    let spec = CorpusSpec { n_train: 1, n_test: 500, cue_img: 1.0, cue_txt: 1.0, ..Default::default() };
    let corpus = generate_corpus(&spec).unwrap();
    let vocab = Vocab::new(spec.vocab_size).unwrap();
    let report = evaluate_with(&corpus.test, &Setting::ALL, |s, setting| cue_rule_predict(s, setting, &vocab)).unwrap();
    for setting in Setting::ALL {
        assert_eq!(report.f1(setting), Some(1.0));
    }
}

#[test]
fn random_predictor_scores_one_half() {
    let mut r = rng::stream(17, &[]);
    let golds: Vec<Label> = (0..10_000).map(|i| if i % 2 == 0 { Label::Real } else { Label::Fake }).collect();
    let preds: Vec<Label> = golds.iter().map(|_| if r.gen_bool(0.5) { Label::Real } else { Label::Fake }).collect();
    let f1 = macro_f1(&preds, &golds).unwrap();
    assert!((f1 - 0.5).abs() <= 0.02, "{f1}");
}

#[test]
fn constant_predictor_on_balanced_set_is_one_third() {
    let golds: Vec<Label> = (0..100).map(|i| if i < 50 { Label::Real } else { Label::Fake }).collect();
    let preds = vec![Label::Fake; 100];
    assert!((macro_f1(&preds, &golds).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn duplicated_test_set_gives_identical_metrics() {
    let corpus = generate_corpus(&CorpusSpec { n_train: 1, n_test: 200, ..Default::default() }).unwrap();
    let doubled: Vec<_> = corpus.test.iter().chain(&corpus.test).cloned().collect();
    let vocab = Vocab::new(96).unwrap();
    let pred = |s: &_, setting| cue_rule_predict(s, setting, &vocab);
    let a = evaluate_with(&corpus.test, &Setting::ALL, pred).unwrap();
    let b = evaluate_with(&doubled, &Setting::ALL, pred).unwrap();
    for setting in Setting::ALL {
        assert_eq!(a.f1(setting), b.f1(setting));
    }
}

#[test]
fn hidden_unimodal_labels_are_excluded_not_scored() {
    let mut test = generate_corpus(&CorpusSpec { n_train: 1, n_test: 50, ..Default::default() }).unwrap().test;
    for s in test.iter_mut().take(20) {
        s.y_img = None;
    }
    let report = evaluate_with(&test, &Setting::ALL, |s, setting| Ok(gold_for(s, setting).unwrap())).unwrap();
    let img = report.get(Setting::ImgOnly).unwrap();
    assert_eq!((img.n, img.excluded), (30, 20));
    assert_eq!(img.macro_f1, 1.0);
}
