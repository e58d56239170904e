//! Property tests for the numeric kernels, ranking, metrics and corpus I/O.

use modality_heads::autodiff::Graph;
use modality_heads::data::{generate_corpus, read_corpus, write_corpus, CorpusSpec};
use modality_heads::eval::{macro_f1, Confusion};
use modality_heads::heads::{jaccard_from_overlap, overlap_stats, per_sample_shares, select_top_k, HeadId, ScoredHead, ShareTable};
use modality_heads::model::{build_sequence, forward_trace, HeadMask, Model, ModelConfig, Setting};
use modality_heads::tensor::Tensor;
use modality_heads::tokens::Label;
use proptest::prelude::*;

fn labels(max: usize) -> impl Strategy<Value = Vec<(bool, bool)>> {
    prop::collection::vec((any::<bool>(), any::<bool>()), 1..max)
}

fn to_label(b: bool) -> Label {
    if b {
        Label::Fake
    } else {
        Label::Real
    }
}

/// Textbook per-class F1 from explicit counting.
fn brute_force_macro_f1(preds: &[Label], golds: &[Label]) -> f64 {
    let mut total = 0.0;
    for class in [Label::Real, Label::Fake] {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fnn = 0usize;
        for (p, g) in preds.iter().zip(golds) {
            match (*p == class, *g == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fnn += 1,
                _ => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
        total += if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    }
    total / 2.0
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..5, cols in 1usize..9, vals in prop::collection::vec(-50.0f64..50.0, 45)) {
        let t = Tensor::new(vec![rows, cols], vals[..rows * cols].to_vec()).unwrap();
        let mut g = Graph::new();
        let x = g.constant(t);
        let s = g.softmax(x);
        let out = g.value(s);
        for i in 0..rows {
            let r = out.row(i);
            prop_assert!(r.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant(vals in prop::collection::vec(-20.0f64..20.0, 1..10), shift in -100.0f64..100.0) {
        let n = vals.len();
        let mut g = Graph::new();
        let a = g.constant(Tensor::new(vec![1, n], vals.clone()).unwrap());
        let b = g.constant(Tensor::new(vec![1, n], vals.iter().map(|v| v + shift).collect()).unwrap());
        let (sa, sb) = (g.softmax(a), g.softmax(b));
        prop_assert!(g.value(sa).max_abs_diff(g.value(sb)) < 1e-12);
    }

    #[test]
    fn macro_f1_matches_brute_force(pairs in labels(200)) {
        let preds: Vec<Label> = pairs.iter().map(|p| to_label(p.0)).collect();
        let golds: Vec<Label> = pairs.iter().map(|p| to_label(p.1)).collect();
        prop_assert_eq!(macro_f1(&preds, &golds).unwrap(), brute_force_macro_f1(&preds, &golds));
    }

    #[test]
    fn macro_f1_is_symmetric_under_relabeling(pairs in labels(200)) {
        let preds: Vec<Label> = pairs.iter().map(|p| to_label(p.0)).collect();
        let golds: Vec<Label> = pairs.iter().map(|p| to_label(p.1)).collect();
        let fp: Vec<Label> = preds.iter().map(|l| l.flip()).collect();
        let fg: Vec<Label> = golds.iter().map(|l| l.flip()).collect();
        let a = macro_f1(&preds, &golds).unwrap();
        let b = macro_f1(&fp, &fg).unwrap();
        prop_assert!((a - b).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn confusion_counts_partition_the_input(pairs in labels(100)) {
        let preds: Vec<Label> = pairs.iter().map(|p| to_label(p.0)).collect();
        let golds: Vec<Label> = pairs.iter().map(|p| to_label(p.1)).collect();
        let c = Confusion::from_pairs(&preds, &golds).unwrap();
        prop_assert_eq!(c.total(), pairs.len());
    }

    #[test]
    fn top_k_ignores_table_row_order(shares in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 8), k in 0usize..=8, rot in 0usize..8) {
        // Distinct scores so the ranking is unambiguous.
        let mut means: Vec<[f64; 3]> = shares.iter().enumerate().map(|(i, &(a, b))| [0.0, a + i as f64 * 1e-9, b - i as f64 * 1e-9]).collect();
        let table = ShareTable { n_layers: 2, n_heads: 4, means: means.clone(), count: 1 };
        let top = select_top_k(&table, k).unwrap();
        // Rotating which head holds which share permutes the selected heads the same way.
        means.rotate_left(rot);
        let rotated = ShareTable { means, ..table.clone() };
        let top_r = select_top_k(&rotated, k).unwrap();
        let unrotate = |h: HeadId| {
            let i = (h.layer * 4 + h.head + rot) % 8;
            HeadId { layer: i / 4, head: i % 4 }
        };
        let mut a: Vec<HeadId> = top.img.iter().map(|s| s.head).collect();
        let mut b: Vec<HeadId> = top_r.img.iter().map(|s| unrotate(s.head)).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        let scores: Vec<f64> = top.img.iter().map(|s| s.score).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn overlap_and_jaccard_agree(k in 1usize..8, shared in 0usize..8, seed in any::<u64>()) {
        let shared = shared.min(k);
        let head = |i: usize| ScoredHead { head: HeadId { layer: i / 8, head: i % 8 }, score: (seed % 97) as f64 / 97.0 };
        let a: Vec<ScoredHead> = (0..k).map(head).collect();
        let b: Vec<ScoredHead> = (0..shared).chain(k..2 * k - shared).map(head).collect();
        let s = overlap_stats(&a, &b).unwrap();
        prop_assert_eq!(s.overlap, shared as f64 / k as f64);
        prop_assert_eq!(s.jaccard, shared as f64 / (2 * k - shared) as f64);
        prop_assert!((s.jaccard - jaccard_from_overlap(s.overlap)).abs() < 1e-15);
    }

    #[test]
    fn corpus_round_trips_through_jsonl(n in 1usize..30, seed in any::<u64>()) {
        let spec = CorpusSpec { n_train: n, n_test: 3, seed, ..Default::default() };
        let corpus = generate_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        write_corpus(&path, &corpus.train).unwrap();
        prop_assert_eq!(read_corpus(&path).unwrap(), corpus.train.clone());
        prop_assert_eq!(generate_corpus(&spec).unwrap(), corpus);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shares_partition_each_head(seed in any::<u64>(), heads in 1usize..4) {
        let cfg = ModelConfig { n_layers: 2, n_query_heads: heads * 2, n_kv_heads: 2, head_dim: 4, ffn_dim: 8, vocab_size: 48, max_seq_len: 32, adapter_rank: 1 };
        let model = Model::init(cfg, seed);
        let spec = CorpusSpec { n_train: 1, n_test: 0, vocab_size: 48, img_len: 5, txt_len: 6, seed, ..Default::default() };
        let sample = generate_corpus(&spec).unwrap().train.remove(0);
        for setting in Setting::ALL {
            let seq = build_sequence(&sample, setting).unwrap();
            let trace = forward_trace(&model, None, &seq, &HeadMask::none()).unwrap();
            for s in per_sample_shares(&trace, &seq).unwrap() {
                prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                if !setting.has_img() { prop_assert_eq!(s[1], 0.0); }
                if !setting.has_text() { prop_assert_eq!(s[2], 0.0); }
            }
        }
    }
}
