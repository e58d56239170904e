//! Base pretraining and stage-wise adapter finetuning.

mod optim;
mod pretrain;
mod run;
mod stage;
mod ukr;

pub use optim::{AdamW, AdamWConfig};
pub use pretrain::{pretrain_base, pretrain_loss, pretrain_sequence, PretrainConfig};
pub use run::{stage_data, train_full, write_history, Ablation, HistoryRow, RunConfig, TrainOutcome};
pub use stage::{stage_label, stage_loss, train_stage, train_step, BatchLog, StageLog, StageSettings};
pub use ukr::{protected_heads, protected_mask, shrink_gradients, UkrConfig};
