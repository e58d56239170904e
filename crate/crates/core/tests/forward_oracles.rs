//! The graph forward pass against a plain loop implementation, a
//! repeated-weights multi-head model, and uniform attention.

use modality_heads::data::{generate_corpus, CorpusSpec, SyntheticSample};
use modality_heads::heads::per_sample_shares;
use modality_heads::model::{
    build_sequence, forward_trace, AdapterSet, HeadId, HeadMask, LayerParams, Model, ModelConfig, Setting,
};
use modality_heads::tensor::Tensor;
use rand::{Rng, SeedableRng};

const REAL: usize = 8;
const FAKE: usize = 9;

fn matvec(x: &[f64], w: &Tensor) -> Vec<f64> {
    let (k, n) = (w.rows(), w.cols());
    assert_eq!(x.len(), k);
    let mut out = vec![0.0; n];
    for i in 0..k {
        for j in 0..n {
            out[j] += x[i] * w.get(i, j);
        }
    }
    out
}

fn layer_norm(x: &[f64], gain: &Tensor, bias: &Tensor) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    x.iter().enumerate().map(|(j, v)| (v - mean) * inv * gain.data()[j] + bias.data()[j]).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Position-by-position forward. Returns the answer logits at the last
/// position and the last position's attention row for every head.
fn reference(model: &Model, adapters: Option<&AdapterSet>, tokens: &[usize], masked: &[HeadId]) -> ([f64; 2], Vec<Vec<f64>>) {
    let cfg = &model.config;
    let p = &model.params;
    let (t, hd) = (tokens.len(), cfg.head_dim);
    let mut xs: Vec<Vec<f64>> =
        (0..t).map(|i| add(p.tok_emb.row(tokens[i]), p.pos_emb.row(i))).collect();
    let mut rows_out = Vec::new();
    for (l, lp) in p.layers.iter().enumerate() {
        let LayerParams { ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, b1, w2, b2 } = lp;
        let hs: Vec<Vec<f64>> = xs.iter().map(|x| layer_norm(x, ln1_gain, ln1_bias)).collect();
        let ks: Vec<Vec<f64>> = hs.iter().map(|h| matvec(h, wk)).collect();
        let vs: Vec<Vec<f64>> = hs.iter().map(|h| matvec(h, wv)).collect();
        let mut next = Vec::with_capacity(t);
        for i in 0..t {
            let mut q = matvec(&hs[i], wq);
            if let Some(a) = adapters {
                q = add(&q, &matvec(&matvec(&hs[i], &a.layers[l].q_down), &a.layers[l].q_up));
            }
            let mut ctx = vec![0.0; cfg.d_model()];
            for head in 0..cfg.n_query_heads {
                let kv = head * cfg.n_kv_heads / cfg.n_query_heads;
                let qh = &q[head * hd..(head + 1) * hd];
                let scores: Vec<f64> = (0..=i)
                    .map(|j| {
                        let kj = &ks[j][kv * hd..(kv + 1) * hd];
                        qh.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (hd as f64).sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                let mut attn: Vec<f64> = e.iter().map(|v| v / z).collect();
                if i + 1 == t {
                    let mut row = attn.clone();
                    row.resize(t, 0.0);
                    rows_out.push(row);
                }
                if masked.contains(&HeadId { layer: l, head }) {
                    attn.iter_mut().for_each(|a| *a = 0.0);
                }
                for (j, a) in attn.iter().enumerate() {
                    for d in 0..hd {
                        ctx[head * hd + d] += a * vs[j][kv * hd + d];
                    }
                }
            }
            let mut o = matvec(&ctx, wo);
            if let Some(a) = adapters {
                o = add(&o, &matvec(&matvec(&ctx, &a.layers[l].o_down), &a.layers[l].o_up));
            }
            let x1 = add(&xs[i], &o);
            let h2 = layer_norm(&x1, ln2_gain, ln2_bias);
            let f: Vec<f64> = add(&matvec(&h2, w1), b1.data()).into_iter().map(gelu).collect();
            let f = add(&matvec(&f, w2), b2.data());
            next.push(add(&x1, &f));
        }
        xs = next;
    }
    let logits = matvec(&layer_norm(&xs[t - 1], &p.lnf_gain, &p.lnf_bias), &p.w_out);
    ([logits[REAL], logits[FAKE]], rows_out)
}

fn random_config(rng: &mut impl Rng) -> ModelConfig {
    let n_kv_heads = rng.gen_range(1..=2);
    ModelConfig {
        n_layers: rng.gen_range(1..=3),
        n_query_heads: n_kv_heads * rng.gen_range(1..=3),
        n_kv_heads,
        head_dim: rng.gen_range(2..=4),
        ffn_dim: rng.gen_range(4..=12),
        vocab_size: 40,
        max_seq_len: 24,
        adapter_rank: rng.gen_range(1..=2),
    }
}

fn random_adapters(cfg: &ModelConfig, rng: &mut impl Rng) -> AdapterSet {
    let mut a = AdapterSet::init(cfg, rng.gen());
    for l in &mut a.layers {
        for t in l.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        }
    }
    a
}

fn samples(n: usize, seed: u64) -> Vec<SyntheticSample> {
    generate_corpus(&CorpusSpec { n_train: n, n_test: 0, img_len: 3, txt_len: 4, vocab_size: 40, seed, ..Default::default() })
        .unwrap()
        .train
}

#[test]
fn graph_forward_matches_loop_reference() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for case in 0..12 {
        let cfg = random_config(&mut rng);
        let model = Model::init(cfg.clone(), case);
        let adapters = (case % 2 == 1).then(|| random_adapters(&cfg, &mut rng));
        let masked: Vec<HeadId> = cfg.heads().filter(|_| rng.gen_bool(0.3)).collect();
        let mask = HeadMask::new(&cfg, masked.iter().copied()).unwrap();
        for sample in samples(2, case) {
            for setting in Setting::ALL {
                let seq = build_sequence(&sample, setting).unwrap();
                let got = forward_trace(&model, adapters.as_ref(), &seq, &mask).unwrap();
                let (logits, rows) = reference(&model, adapters.as_ref(), &seq.token_ids, &masked);
                for c in 0..2 {
                    assert!((got.label_logits[c] - logits[c]).abs() < 1e-10, "case {case}: {got:?} vs {logits:?}");
                }
                for (a, b) in got.attention_rows.iter().zip(&rows) {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

/// Grouped-query attention is multi-head attention whose key and value
/// projections repeat within each group.
#[test]
fn grouped_query_equals_multi_head_with_repeated_kv() {
    let gqa_cfg = ModelConfig { n_layers: 2, n_query_heads: 4, n_kv_heads: 2, head_dim: 3, ffn_dim: 8, vocab_size: 40, max_seq_len: 24, adapter_rank: 1 };
    let mha_cfg = ModelConfig { n_kv_heads: 4, ..gqa_cfg.clone() };
    let gqa = Model::init(gqa_cfg.clone(), 5);
    let mut mha = gqa.clone();
    mha.config = mha_cfg.clone();
    let hd = gqa_cfg.head_dim;
    for layer in &mut mha.params.layers {
        for w in [&mut layer.wk, &mut layer.wv] {
            let d = w.rows();
            let mut data = Vec::with_capacity(d * 4 * hd);
            for i in 0..d {
                for head in 0..4 {
                    let grp = head / 2;
                    data.extend_from_slice(&w.row(i)[grp * hd..(grp + 1) * hd]);
                }
            }
            *w = Tensor::new(vec![d, 4 * hd], data).unwrap();
        }
    }
    for sample in samples(3, 9) {
        let seq = build_sequence(&sample, Setting::Multi).unwrap();
        let a = forward_trace(&gqa, None, &seq, &HeadMask::none()).unwrap();
        let b = forward_trace(&mha, None, &seq, &HeadMask::none()).unwrap();
        assert!((a.label_logits[0] - b.label_logits[0]).abs() < 1e-12);
        assert!((a.label_logits[1] - b.label_logits[1]).abs() < 1e-12);
        assert_eq!(a.attention_rows.len(), b.attention_rows.len());
        for (x, y) in a.attention_rows.iter().zip(&b.attention_rows) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }
}

/// With zero query weights every score is equal, so the query row is
/// uniform over the sequence and shares are block-length ratios.
#[test]
fn zero_queries_give_length_proportional_shares() {
    let cfg = ModelConfig { n_layers: 2, n_query_heads: 4, n_kv_heads: 2, head_dim: 4, ffn_dim: 8, vocab_size: 40, max_seq_len: 24, adapter_rank: 1 };
    let mut model = Model::init(cfg.clone(), 2);
    for l in &mut model.params.layers {
        l.wq = Tensor::zeros(l.wq.shape());
    }
    for sample in samples(3, 4) {
        for setting in Setting::ALL {
            let seq = build_sequence(&sample, setting).unwrap();
            let trace = forward_trace(&model, None, &seq, &HeadMask::none()).unwrap();
            let t = seq.len() as f64;
            let want = [
                (seq.len() - sample.img_tokens.len() * setting.has_img() as usize - sample.txt_tokens.len() * setting.has_text() as usize) as f64 / t,
                (sample.img_tokens.len() * setting.has_img() as usize) as f64 / t,
                (sample.txt_tokens.len() * setting.has_text() as usize) as f64 / t,
            ];
            for shares in per_sample_shares(&trace, &seq).unwrap() {
                for g in 0..3 {
                    assert!((shares[g] - want[g]).abs() < 1e-12, "{setting}: {shares:?} vs {want:?}");
                }
            }
        }
    }
}

#[test]
fn masking_every_head_removes_token_mixing() {
    // With all contexts zeroed, position t-1's output depends only on its
    // own token and position, so changing earlier tokens leaves it alone.
    let cfg = ModelConfig { n_layers: 2, n_query_heads: 2, n_kv_heads: 1, head_dim: 4, ffn_dim: 8, vocab_size: 40, max_seq_len: 24, adapter_rank: 1 };
    let model = Model::init(cfg.clone(), 3);
    let all = HeadMask::all(&cfg);
    let s = samples(2, 1);
    let a = build_sequence(&s[0], Setting::Multi).unwrap();
    let b = build_sequence(&s[1], Setting::Multi).unwrap();
    assert_eq!(a.len(), b.len());
    let ta = forward_trace(&model, None, &a, &all).unwrap();
    let tb = forward_trace(&model, None, &b, &all).unwrap();
    assert_eq!(ta.label_logits, tb.label_logits);
}
