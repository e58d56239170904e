//! Synthetic multimodal corpus: generation, unimodal label budgets, file I/O.

mod budget;
mod io;
mod synth;

pub use budget::{apply_budget, revealed_count, Budget};
pub use io::{read_corpus, write_corpus};
pub use synth::{generate_corpus, Corpus, CorpusSpec};

use serde::{Deserialize, Serialize};

use crate::tokens::Label;

/// One paired image/text example. `y_img` / `y_txt` are `None` when the
/// unimodal label is hidden.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSample {
    pub id: u64,
    #[serde(rename = "img")]
    pub img_tokens: Vec<usize>,
    #[serde(rename = "txt")]
    pub txt_tokens: Vec<usize>,
    pub y: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_img: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_txt: Option<Label>,
}
