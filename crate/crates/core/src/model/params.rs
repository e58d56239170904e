use rand::Rng;
use rand_distr::StandardNormal;

use super::ModelConfig;
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::tensor::Tensor;

fn normal(rng: &mut impl Rng, shape: &[usize], std: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * std).collect();
    Tensor::new(shape.to_vec(), data).expect("shape from product")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

const LAYER_NAMES: [&str; 12] =
    ["ln1_gain", "ln1_bias", "wq", "wk", "wv", "wo", "ln2_gain", "ln2_bias", "w1", "b1", "w2", "b2"];

impl LayerParams {
    fn tensors(&self) -> [&Tensor; 12] {
        [
            &self.ln1_gain, &self.ln1_bias, &self.wq, &self.wk, &self.wv, &self.wo,
            &self.ln2_gain, &self.ln2_bias, &self.w1, &self.b1, &self.w2, &self.b2,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.ln1_gain, &mut self.ln1_bias, &mut self.wq, &mut self.wk, &mut self.wv,
            &mut self.wo, &mut self.ln2_gain, &mut self.ln2_bias, &mut self.w1, &mut self.b1,
            &mut self.w2, &mut self.b2,
        ]
    }
}

/// Base (pretrained, then frozen) weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tok_emb: Tensor,
    pub pos_emb: Tensor,
    pub layers: Vec<LayerParams>,
    pub lnf_gain: Tensor,
    pub lnf_bias: Tensor,
    pub w_out: Tensor,
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = stream(seed, &[0x1417]);
        let (d, f, v) = (cfg.d_model(), cfg.ffn_dim, cfg.vocab_size);
        let wstd = 1.0 / (d as f64).sqrt();
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                ln1_gain: Tensor::full(&[1, d], 1.0),
                ln1_bias: Tensor::zeros(&[1, d]),
                wq: normal(&mut rng, &[d, d], wstd),
                wk: normal(&mut rng, &[d, cfg.kv_dim()], wstd),
                wv: normal(&mut rng, &[d, cfg.kv_dim()], wstd),
                wo: normal(&mut rng, &[d, d], wstd * 0.5),
                ln2_gain: Tensor::full(&[1, d], 1.0),
                ln2_bias: Tensor::zeros(&[1, d]),
                w1: normal(&mut rng, &[d, f], wstd),
                b1: Tensor::zeros(&[1, f]),
                w2: normal(&mut rng, &[f, d], 0.5 / (f as f64).sqrt()),
                b2: Tensor::zeros(&[1, d]),
            })
            .collect();
        Self {
            tok_emb: normal(&mut rng, &[v, d], 1.0),
            pos_emb: normal(&mut rng, &[cfg.max_seq_len, d], 0.5),
            layers,
            lnf_gain: Tensor::full(&[1, d], 1.0),
            lnf_bias: Tensor::zeros(&[1, d]),
            w_out: normal(&mut rng, &[d, v], wstd),
        }
    }

    /// All weights zero, gains one.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let mut p = Self::init(cfg, 0);
        for (name, t) in p.named_mut() {
            let fill = if name.ends_with("gain") { 1.0 } else { 0.0 };
            t.data_mut().iter_mut().for_each(|x| *x = fill);
        }
        p
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("tok_emb".to_string(), &self.tok_emb), ("pos_emb".to_string(), &self.pos_emb)];
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layers.{l}.{name}"), t));
            }
        }
        out.push(("lnf_gain".into(), &self.lnf_gain));
        out.push(("lnf_bias".into(), &self.lnf_bias));
        out.push(("w_out".into(), &self.w_out));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![
            ("tok_emb".to_string(), &mut self.tok_emb),
            ("pos_emb".to_string(), &mut self.pos_emb),
        ];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in LAYER_NAMES.iter().zip(layer.tensors_mut()) {
                out.push((format!("layers.{l}.{name}"), t));
            }
        }
        out.push(("lnf_gain".into(), &mut self.lnf_gain));
        out.push(("lnf_bias".into(), &mut self.lnf_bias));
        out.push(("w_out".into(), &mut self.w_out));
        out
    }

    /// Registers every weight as a leaf; `trainable` selects params vs constants.
    pub fn register<'p>(&'p self, g: &mut Graph<'p>, trainable: bool) -> ModelVars {
        self.register_with(|t| if trainable { g.param_ref(t) } else { g.constant_ref(t) })
    }

    /// Registers owned copies of every weight as constants, for graphs that
    /// may outlive `self`.
    pub fn register_cloned(&self, g: &mut Graph<'_>) -> ModelVars {
        self.register_with(|t| g.constant(t.clone()))
    }

    fn register_with<'p>(&'p self, mut leaf: impl FnMut(&'p Tensor) -> Var) -> ModelVars {
        let tok_emb = leaf(&self.tok_emb);
        let pos_emb = leaf(&self.pos_emb);
        let layers = self
            .layers
            .iter()
            .map(|p| LayerVars {
                ln1_gain: leaf(&p.ln1_gain),
                ln1_bias: leaf(&p.ln1_bias),
                wq: leaf(&p.wq),
                wk: leaf(&p.wk),
                wv: leaf(&p.wv),
                wo: leaf(&p.wo),
                ln2_gain: leaf(&p.ln2_gain),
                ln2_bias: leaf(&p.ln2_bias),
                w1: leaf(&p.w1),
                b1: leaf(&p.b1),
                w2: leaf(&p.w2),
                b2: leaf(&p.b2),
            })
            .collect();
        ModelVars {
            tok_emb,
            pos_emb,
            layers,
            lnf_gain: leaf(&self.lnf_gain),
            lnf_bias: leaf(&self.lnf_bias),
            w_out: leaf(&self.w_out),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerVars {
    pub ln1_gain: Var,
    pub ln1_bias: Var,
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub ln2_gain: Var,
    pub ln2_bias: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl LayerVars {
    fn all(&self) -> [Var; 12] {
        [
            self.ln1_gain, self.ln1_bias, self.wq, self.wk, self.wv, self.wo, self.ln2_gain,
            self.ln2_bias, self.w1, self.b1, self.w2, self.b2,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ModelVars {
    pub tok_emb: Var,
    pub pos_emb: Var,
    pub layers: Vec<LayerVars>,
    pub lnf_gain: Var,
    pub lnf_bias: Var,
    pub w_out: Var,
}

impl ModelVars {
    /// Leaves in the same order as [`ModelParams::named`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.tok_emb, self.pos_emb];
        for l in &self.layers {
            out.extend(l.all());
        }
        out.extend([self.lnf_gain, self.lnf_bias, self.w_out]);
        out
    }
}

/// Low-rank factors for one layer. The query delta is `h · q_down · q_up`
/// and the output delta is `c · o_down · o_up`; `q_up` columns and
/// `o_down` rows are indexed by query head.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerAdapters {
    pub q_down: Tensor,
    pub q_up: Tensor,
    pub o_down: Tensor,
    pub o_up: Tensor,
}

impl LayerAdapters {
    pub fn tensors(&self) -> [&Tensor; 4] {
        [&self.q_down, &self.q_up, &self.o_down, &self.o_up]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.q_down, &mut self.q_up, &mut self.o_down, &mut self.o_up]
    }
}

pub const ADAPTER_NAMES: [&str; 4] = ["q_down", "q_up", "o_down", "o_up"];

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterSet {
    pub layers: Vec<LayerAdapters>,
    /// Base weights never receive gradients while adapters are trained.
    pub base_frozen: bool,
}

impl AdapterSet {
    /// Down factors random, up factors zero: the initial delta is exactly zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = stream(seed, &[0xADA7]);
        let (d, r) = (cfg.d_model(), cfg.adapter_rank);
        let std = 1.0 / (d as f64).sqrt();
        let layers = (0..cfg.n_layers)
            .map(|_| LayerAdapters {
                q_down: normal(&mut rng, &[d, r], std),
                q_up: Tensor::zeros(&[r, d]),
                o_down: normal(&mut rng, &[d, r], std),
                o_up: Tensor::zeros(&[r, d]),
            })
            .collect();
        Self { layers, base_frozen: true }
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d, r) = (cfg.d_model(), cfg.adapter_rank);
        let layers = (0..cfg.n_layers)
            .map(|_| LayerAdapters {
                q_down: Tensor::zeros(&[d, r]),
                q_up: Tensor::zeros(&[r, d]),
                o_down: Tensor::zeros(&[d, r]),
                o_up: Tensor::zeros(&[r, d]),
            })
            .collect();
        Self { layers, base_frozen: true }
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let (d, r) = (cfg.d_model(), cfg.adapter_rank);
        if self.layers.len() != cfg.n_layers {
            return Err(Error::Shape(format!("{} adapter layers for {} model layers", self.layers.len(), cfg.n_layers)));
        }
        for l in &self.layers {
            let want: [&[usize]; 4] = [&[d, r], &[r, d], &[d, r], &[r, d]];
            for (t, w) in l.tensors().iter().zip(want) {
                if t.shape() != w {
                    return Err(Error::Shape(format!("adapter {:?} vs expected {w:?}", t.shape())));
                }
            }
        }
        Ok(())
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in ADAPTER_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("adapters.{l}.{name}"), t));
            }
        }
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in ADAPTER_NAMES.iter().zip(layer.tensors_mut()) {
                out.push((format!("adapters.{l}.{name}"), t));
            }
        }
        out
    }

    pub fn register<'p>(&'p self, g: &mut Graph<'p>, trainable: bool) -> AdapterVars {
        let mut leaf = |t: &'p Tensor| if trainable { g.param_ref(t) } else { g.constant_ref(t) };
        AdapterVars {
            layers: self
                .layers
                .iter()
                .map(|l| [leaf(&l.q_down), leaf(&l.q_up), leaf(&l.o_down), leaf(&l.o_up)])
                .collect(),
        }
    }

    /// Gradients collected from a graph, zero where none arrived.
    pub fn grads_from(&self, g: &Graph<'_>, vars: &AdapterVars) -> AdapterSet {
        let layers = self
            .layers
            .iter()
            .zip(&vars.layers)
            .map(|(l, v)| {
                let grab = |t: &Tensor, var: Var| g.grad(var).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()));
                LayerAdapters {
                    q_down: grab(&l.q_down, v[0]),
                    q_up: grab(&l.q_up, v[1]),
                    o_down: grab(&l.o_down, v[2]),
                    o_up: grab(&l.o_up, v[3]),
                }
            })
            .collect();
        AdapterSet { layers, base_frozen: self.base_frozen }
    }
}

/// Adapter leaves per layer, ordered `[q_down, q_up, o_down, o_up]`.
#[derive(Clone, Debug)]
pub struct AdapterVars {
    pub layers: Vec<[Var; 4]>,
}
