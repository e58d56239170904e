use rand::seq::SliceRandom;
use rand::Rng;

use super::optim::{AdamW, AdamWConfig};
use crate::autodiff::Graph;
use crate::data::SyntheticSample;
use crate::error::{Error, Result};
use crate::model::{build_sequence, forward_graph, HeadMask, Model, Setting, TokenSequence};
use crate::rng;
use crate::tensor::Tensor;
use crate::tokens::Vocab;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optim: AdamWConfig,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { steps: 300, batch_size: 16, optim: AdamWConfig { lr: 3e-3, weight_decay: 0.0, ..Default::default() }, seed: 0 }
    }
}

/// MULTI-layout sequence followed by a two-token description: the image
/// cue and the text cue found in the sample, in random order. Predicting
/// the description from the query position forces attention onto the
/// modality blocks; no veracity answer is ever shown.
pub fn pretrain_sequence(sample: &SyntheticSample, vocab: &Vocab, rng: &mut impl Rng) -> Result<TokenSequence> {
    let seq = build_sequence(sample, Setting::Multi)?;
    let find = |tokens: &[usize], range: std::ops::Range<usize>| {
        tokens
            .iter()
            .copied()
            .find(|&t| range.contains(&t) && vocab.cue_label(t).is_some())
            .ok_or_else(|| Error::invalid(format!("sample {} has a segment without a cue", sample.id)))
    };
    let mut desc = [find(&sample.img_tokens, vocab.img_range())?, find(&sample.txt_tokens, vocab.txt_range())?];
    desc.shuffle(rng);
    Ok(seq.with_continuation(&desc))
}

/// Mean next-token cross-entropy over every position but the last.
fn sequence_loss<'p>(g: &mut Graph<'p>, model: &'p Model, seqs: &[TokenSequence], trainable: bool) -> Result<(crate::autodiff::Var, Vec<crate::autodiff::Var>)> {
    let mv = model.params.register(g, trainable);
    let mask = HeadMask::none();
    let mut losses = Vec::with_capacity(seqs.len());
    for seq in seqs {
        let t = seq.len();
        let gt = forward_graph(g, &model.config, &mv, None, seq, &mask, true)?;
        let inputs = g.slice_rows(gt.logits, 0, t - 1)?;
        losses.push(g.cross_entropy(inputs, &seq.token_ids[1..])?);
    }
    let total = g.add_n(&losses)?;
    Ok((g.scale(total, 1.0 / seqs.len() as f64), mv.all()))
}

/// Language-model loss of `model` on `data` with a fixed description order.
pub fn pretrain_loss(model: &Model, data: &[SyntheticSample], seed: u64) -> Result<f64> {
    let vocab = model.config.vocab();
    let mut r = rng::stream(seed, &[0x9E7E]);
    let seqs = data.iter().map(|s| pretrain_sequence(s, &vocab, &mut r)).collect::<Result<Vec<_>>>()?;
    let mut g = Graph::new();
    let (loss, _) = sequence_loss(&mut g, model, &seqs, false)?;
    Ok(g.value(loss).item())
}

/// Trains every base weight on the description task. Returns the loss of
/// each step. Zero steps leave the model untouched.
pub fn pretrain_base(model: &mut Model, corpus: &[SyntheticSample], cfg: &PretrainConfig) -> Result<Vec<f64>> {
    if cfg.steps == 0 {
        return Ok(Vec::new());
    }
    if corpus.is_empty() || cfg.batch_size == 0 {
        return Err(Error::invalid("pretraining needs samples and a positive batch size"));
    }
    let vocab = model.config.vocab();
    let mut opt = AdamW::new(cfg.optim, &model.params.named().iter().map(|(_, t)| *t).collect::<Vec<_>>());
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut r = rng::stream(cfg.seed, &[0x9E7E, step as u64]);
        let seqs = (0..cfg.batch_size)
            .map(|_| pretrain_sequence(&corpus[r.gen_range(0..corpus.len())], &vocab, &mut r))
            .collect::<Result<Vec<_>>>()?;
        let grads: Vec<Tensor> = {
            let mut g = Graph::new();
            let (loss, vars) = sequence_loss(&mut g, model, &seqs, true)?;
            g.backward(loss)?;
            losses.push(g.value(loss).item());
            vars.iter()
                .map(|&v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
                .collect()
        };
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        let mut params: Vec<&mut Tensor> = model.params.named_mut().into_iter().map(|(_, t)| t).collect();
        opt.step(&mut params, &grad_refs, None)?;
    }
    Ok(losses)
}
