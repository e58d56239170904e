//! End-to-end helpers: corpus, pretrained base, head identification and
//! finetuning under one seed.

use crate::data::{generate_corpus, Corpus, CorpusSpec, SyntheticSample};
use crate::error::Result;
use crate::heads::{aggregate_shares, select_bottom_k, select_top_k, HeadAssignments, ShareTable};
use crate::model::{Model, ModelConfig, Setting};
use crate::training::{pretrain_base, train_full, PretrainConfig, RunConfig, TrainOutcome};

/// Shares of the base model on the training inputs (MULTI setting) and the
/// top-K image and text heads ranked from them.
pub fn identify_heads(model: &Model, train: &[SyntheticSample], k: usize) -> Result<(ShareTable, HeadAssignments)> {
    let table = aggregate_shares(model, None, train, Setting::Multi)?;
    let top = select_top_k(&table, k)?;
    Ok((table, top))
}

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub run: RunConfig,
}


impl ExperimentConfig {
    /// The same experiment with every seed replaced by `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.corpus.seed = seed;
        c.pretrain.seed = seed;
        c.run.seed = seed;
        c
    }
}

/// A pretrained base with its share table and head lists.
#[derive(Clone, Debug)]
pub struct PreparedBase {
    pub corpus: Corpus,
    pub model: Model,
    pub table: ShareTable,
    pub top: HeadAssignments,
    pub bottom: HeadAssignments,
    pub pretrain_losses: Vec<f64>,
}

impl PreparedBase {
    pub fn assignments_for(&self, run: &RunConfig) -> &HeadAssignments {
        if run.ablation.uses_bottom_k() {
            &self.bottom
        } else {
            &self.top
        }
    }
}

pub fn prepare_base(cfg: &ExperimentConfig) -> Result<PreparedBase> {
    let corpus = generate_corpus(&cfg.corpus)?;
    let mut model = Model::init(cfg.model.clone(), cfg.pretrain.seed);
    let pretrain_losses = pretrain_base(&mut model, &corpus.train, &cfg.pretrain)?;
    let (table, top) = identify_heads(&model, &corpus.train, cfg.run.k)?;
    let bottom = select_bottom_k(&table, cfg.run.k)?;
    Ok(PreparedBase { corpus, model, table, top, bottom, pretrain_losses })
}

/// Finetunes adapters on `base` under `run`, evaluating on the test split.
pub fn finetune(base: &PreparedBase, run: &RunConfig) -> Result<TrainOutcome> {
    train_full(&base.model, &base.corpus.train, Some(&base.corpus.test), base.assignments_for(run), run)
}
