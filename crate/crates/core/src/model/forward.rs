use super::{AdapterSet, AdapterVars, HeadId, Model, ModelConfig, ModelVars, TokenSequence};
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tokens::{Label, ANSWER_FAKE, ANSWER_REAL};

/// Heads whose context vectors are zeroed before the output projection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeadMask {
    masked: Vec<bool>,
}

impl HeadMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(cfg: &ModelConfig, heads: impl IntoIterator<Item = HeadId>) -> Result<Self> {
        let mut masked = vec![false; cfg.total_heads()];
        for id in heads {
            cfg.check_head(id)?;
            masked[cfg.head_index(id)] = true;
        }
        Ok(Self { masked })
    }

    pub fn all(cfg: &ModelConfig) -> Self {
        Self { masked: vec![true; cfg.total_heads()] }
    }

    pub fn is_masked(&self, cfg: &ModelConfig, id: HeadId) -> bool {
        self.masked.get(cfg.head_index(id)).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }
}

/// Graph handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct GraphTrace {
    /// `[T, V]` when full logits were requested, otherwise `[1, V]` at the
    /// query position.
    pub logits: Var,
    /// Attention of the query position over all keys, `[1, T]`, indexed by
    /// `layer * n_query_heads + head`.
    pub attn_rows: Vec<Var>,
}

/// Builds the forward pass of `seq` into `g`.
///
/// With `full_logits == false` the last layer only computes the query
/// position's row; earlier layers still process every position.
pub fn forward_graph<'p>(
    g: &mut Graph<'p>,
    cfg: &ModelConfig,
    mv: &ModelVars,
    adapters: Option<&AdapterVars>,
    seq: &TokenSequence,
    mask: &HeadMask,
    full_logits: bool,
) -> Result<GraphTrace> {
    let t = seq.len();
    if t == 0 || t > cfg.max_seq_len {
        return Err(Error::invalid(format!("sequence length {t} outside 1..={}", cfg.max_seq_len)));
    }
    if let Some(&bad) = seq.token_ids.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(Error::invalid(format!("unknown token id {bad}")));
    }
    let hd = cfg.head_dim;
    let scale = 1.0 / (hd as f64).sqrt();

    let tok = g.gather_rows(mv.tok_emb, &seq.token_ids)?;
    let positions: Vec<usize> = (0..t).collect();
    let pos = g.gather_rows(mv.pos_emb, &positions)?;
    let mut x = g.add(tok, pos)?;

    let mut attn_rows = Vec::with_capacity(cfg.total_heads());
    for (l, lv) in mv.layers.iter().enumerate() {
        let last_only = !full_logits && l + 1 == cfg.n_layers;
        let h = g.layer_norm(x, lv.ln1_gain, lv.ln1_bias)?;
        let k = g.matmul(h, lv.wk)?;
        let v = g.matmul(h, lv.wv)?;
        let (hq, x_res) = if last_only {
            (g.slice_rows(h, t - 1, t)?, g.slice_rows(x, t - 1, t)?)
        } else {
            (h, x)
        };
        let mut q = g.matmul(hq, lv.wq)?;
        if let Some(av) = adapters {
            let [q_down, q_up, _, _] = av.layers[l];
            let low = g.matmul(hq, q_down)?;
            let delta = g.matmul(low, q_up)?;
            q = g.add(q, delta)?;
        }
        let rows = g.value(q).rows();

        let mut kv_cache: Vec<Option<(Var, Var)>> = vec![None; cfg.n_kv_heads];
        let mut contexts = Vec::with_capacity(cfg.n_query_heads);
        for head in 0..cfg.n_query_heads {
            let grp = head / cfg.group_size();
            let (kg, vg) = match kv_cache[grp] {
                Some(pair) => pair,
                None => {
                    let pair = (g.slice_cols(k, grp * hd, (grp + 1) * hd)?, g.slice_cols(v, grp * hd, (grp + 1) * hd)?);
                    kv_cache[grp] = Some(pair);
                    pair
                }
            };
            let qh = g.slice_cols(q, head * hd, (head + 1) * hd)?;
            let scores = g.matmul_bt(qh, kg)?;
            let scores = g.scale(scores, scale);
            let scores = g.causal_mask(scores)?;
            let attn = g.softmax(scores);
            let row = if rows == 1 { attn } else { g.slice_rows(attn, rows - 1, rows)? };
            attn_rows.push(row);
            let ctx = if mask.is_masked(cfg, HeadId::new(l, head)) {
                g.constant(Tensor::zeros(&[rows, hd]))
            } else {
                g.matmul(attn, vg)?
            };
            contexts.push(ctx);
        }
        let c = g.concat_cols(&contexts)?;
        let mut o = g.matmul(c, lv.wo)?;
        if let Some(av) = adapters {
            let [_, _, o_down, o_up] = av.layers[l];
            let low = g.matmul(c, o_down)?;
            let delta = g.matmul(low, o_up)?;
            o = g.add(o, delta)?;
        }
        let x1 = g.add(x_res, o)?;
        let h2 = g.layer_norm(x1, lv.ln2_gain, lv.ln2_bias)?;
        let f = g.matmul(h2, lv.w1)?;
        let f = g.add_row(f, lv.b1)?;
        let f = g.gelu(f);
        let f = g.matmul(f, lv.w2)?;
        let f = g.add_row(f, lv.b2)?;
        x = g.add(x1, f)?;
    }

    let rows = g.value(x).rows();
    let x_out = if !full_logits && rows > 1 { g.slice_rows(x, rows - 1, rows)? } else { x };
    let hf = g.layer_norm(x_out, mv.lnf_gain, mv.lnf_bias)?;
    let logits = g.matmul(hf, mv.w_out)?;
    Ok(GraphTrace { logits, attn_rows })
}

/// Answer logits and query-position attention rows of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// Logits of the `(REAL, FAKE)` answer ids at the query position.
    pub label_logits: [f64; 2],
    pub attention_rows: Vec<Vec<f64>>,
    pub n_query_heads: usize,
}

impl ForwardTrace {
    pub fn row(&self, id: HeadId) -> &[f64] {
        &self.attention_rows[id.layer * self.n_query_heads + id.head]
    }

    pub fn from_graph(g: &Graph<'_>, gt: &GraphTrace, n_query_heads: usize) -> Self {
        let logits = g.value(gt.logits);
        let last = logits.row(logits.rows() - 1);
        ForwardTrace {
            label_logits: [last[ANSWER_REAL], last[ANSWER_FAKE]],
            attention_rows: gt.attn_rows.iter().map(|&r| g.value(r).data().to_vec()).collect(),
            n_query_heads,
        }
    }
}

pub fn forward_trace(
    model: &Model,
    adapters: Option<&AdapterSet>,
    seq: &TokenSequence,
    mask: &HeadMask,
) -> Result<ForwardTrace> {
    let mut g = Graph::new();
    let mv = model.params.register(&mut g, false);
    let av = adapters.map(|a| a.register(&mut g, false));
    let gt = forward_graph(&mut g, &model.config, &mv, av.as_ref(), seq, mask, false)?;
    Ok(ForwardTrace::from_graph(&g, &gt, model.config.n_query_heads))
}

/// Argmax over the two answer logits; an exact tie goes to REAL.
pub fn predict_label(trace: &ForwardTrace) -> Label {
    if trace.label_logits[1] > trace.label_logits[0] {
        Label::Fake
    } else {
        Label::Real
    }
}

/// A model with a fixed set of heads masked.
#[derive(Clone, Copy, Debug)]
pub struct ModelView<'m> {
    pub model: &'m Model,
    pub mask: &'m HeadMask,
}

impl ModelView<'_> {
    pub fn forward_trace(&self, adapters: Option<&AdapterSet>, seq: &TokenSequence) -> Result<ForwardTrace> {
        forward_trace(self.model, adapters, seq, self.mask)
    }
}

/// Validates `masked` against the model's config and returns the mask to
/// pair with the model in a [`ModelView`].
pub fn apply_head_mask(model: &Model, masked: &[HeadId]) -> Result<HeadMask> {
    HeadMask::new(&model.config, masked.iter().copied())
}
