//! Tiny decoder-only transformer with grouped-query attention and low-rank
//! adapters on the query and output projections.

mod checkpoint;
mod forward;
mod params;
mod sequence;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    apply_head_mask, forward_graph, forward_trace, predict_label, ForwardTrace, GraphTrace,
    HeadMask, ModelView,
};
pub use params::{AdapterSet, AdapterVars, LayerAdapters, LayerParams, ModelParams, ModelVars};
pub use sequence::{build_sequence, Group, Setting, Stage, TokenSequence};

use std::fmt;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::tokens::Vocab;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_query_heads: usize,
    pub n_kv_heads: usize,
    pub head_dim: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub adapter_rank: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            n_query_heads: 8,
            n_kv_heads: 2,
            head_dim: 8,
            ffn_dim: 256,
            vocab_size: 96,
            max_seq_len: 64,
            adapter_rank: 4,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "n_layers",
    "n_query_heads",
    "n_kv_heads",
    "head_dim",
    "ffn_dim",
    "vocab_size",
    "max_seq_len",
    "adapter_rank",
];

impl ModelConfig {
    pub fn d_model(&self) -> usize {
        self.n_query_heads * self.head_dim
    }

    pub fn kv_dim(&self) -> usize {
        self.n_kv_heads * self.head_dim
    }

    pub fn total_heads(&self) -> usize {
        self.n_layers * self.n_query_heads
    }

    /// Query heads per shared key/value group.
    pub fn group_size(&self) -> usize {
        self.n_query_heads / self.n_kv_heads
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.n_layers,
            self.n_query_heads,
            self.n_kv_heads,
            self.head_dim,
            self.ffn_dim,
            self.max_seq_len,
            self.adapter_rank,
        ];
        if positive.contains(&0) {
            return Err(Error::invalid(format!("model config has a zero dimension: {self:?}")));
        }
        if !self.n_query_heads.is_multiple_of(self.n_kv_heads) {
            return Err(Error::invalid(format!(
                "n_kv_heads {} does not divide n_query_heads {}",
                self.n_kv_heads, self.n_query_heads
            )));
        }
        Vocab::new(self.vocab_size)?;
        Ok(())
    }

    pub fn vocab(&self) -> Vocab {
        Vocab { size: self.vocab_size }
    }

    pub fn heads(&self) -> impl Iterator<Item = HeadId> + '_ {
        (0..self.n_layers).flat_map(move |l| (0..self.n_query_heads).map(move |h| HeadId::new(l, h)))
    }

    pub fn head_index(&self, id: HeadId) -> usize {
        id.layer * self.n_query_heads + id.head
    }

    pub fn check_head(&self, id: HeadId) -> Result<()> {
        if id.layer >= self.n_layers || id.head >= self.n_query_heads {
            return Err(Error::invalid(format!("head {id} outside {}x{}", self.n_layers, self.n_query_heads)));
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "n_layers={}\nn_query_heads={}\nn_kv_heads={}\nhead_dim={}\nffn_dim={}\nvocab_size={}\nmax_seq_len={}\nadapter_rank={}\n",
            self.n_layers,
            self.n_query_heads,
            self.n_kv_heads,
            self.head_dim,
            self.ffn_dim,
            self.vocab_size,
            self.max_seq_len,
            self.adapter_rank
        )
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.check_keys(CONFIG_KEYS)?;
        let d = Self::default();
        let cfg = Self {
            n_layers: kv.get_or("n_layers", d.n_layers)?,
            n_query_heads: kv.get_or("n_query_heads", d.n_query_heads)?,
            n_kv_heads: kv.get_or("n_kv_heads", d.n_kv_heads)?,
            head_dim: kv.get_or("head_dim", d.head_dim)?,
            ffn_dim: kv.get_or("ffn_dim", d.ffn_dim)?,
            vocab_size: kv.get_or("vocab_size", d.vocab_size)?,
            max_seq_len: kv.get_or("max_seq_len", d.max_seq_len)?,
            adapter_rank: kv.get_or("adapter_rank", d.adapter_rank)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let params = ModelParams::init(&config, seed);
        Self { config, params }
    }
}

/// A query head: `(layer, head)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub const fn new(layer: usize, head: usize) -> Self {
        Self { layer, head }
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.layer, self.head)
    }
}
