//! Head-wise modality specialization for multimodal classification under
//! missing modality, at desk scale.
//!
//! A tiny grouped-query transformer reads synthetic image and text token
//! segments and answers REAL or FAKE. The crate finds the attention heads
//! that specialize in each modality, keeps them specialized during
//! low-rank finetuning with a lower-bound attention-share penalty, and
//! shrinks their gradient blocks in training stages of the other modality.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod heads;
pub mod hms;
pub mod kv;
pub mod model;
pub mod pipeline;
pub mod provenance;
pub mod rng;
pub mod tensor;
pub mod tokens;
pub mod training;

pub use error::{Error, Result};
