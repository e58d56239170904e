//! Vocabulary layout shared by the generator and the model.
//!
//! ```text
//! 0..8           instruction ids (prefix 0,1,2; suffix 3,4)
//! 8, 9           answer ids REAL, FAKE
//! 16..img_end    image range: real cue, fake cue, then distractors
//! img_end..V     text range:  real cue, fake cue, then distractors
//! ```

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PREFIX: [usize; 3] = [0, 1, 2];
pub const SUFFIX: [usize; 2] = [3, 4];
pub const ANSWER_REAL: usize = 8;
pub const ANSWER_FAKE: usize = 9;
const MODALITY_START: usize = 16;
/// Smallest vocabulary leaving each modality its two cues and two distractors.
pub const MIN_VOCAB: usize = MODALITY_START + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn answer_id(self) -> usize {
        match self {
            Label::Real => ANSWER_REAL,
            Label::Fake => ANSWER_FAKE,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        }
    }

    pub fn or(self, other: Label) -> Label {
        if self == Label::Fake || other == Label::Fake {
            Label::Fake
        } else {
            Label::Real
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "REAL",
            Label::Fake => "FAKE",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "REAL" => Ok(Label::Real),
            "FAKE" => Ok(Label::Fake),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// Modality token ranges for a given vocabulary size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vocab {
    pub size: usize,
}

impl Vocab {
    pub fn new(size: usize) -> Result<Self> {
        if size < MIN_VOCAB {
            return Err(Error::invalid(format!("vocab_size {size} below minimum {MIN_VOCAB}")));
        }
        Ok(Self { size })
    }

    fn split(&self) -> usize {
        MODALITY_START + (self.size - MODALITY_START) / 2
    }

    pub fn img_range(&self) -> Range<usize> {
        MODALITY_START..self.split()
    }

    pub fn txt_range(&self) -> Range<usize> {
        self.split()..self.size
    }

    pub fn img_cue(&self, label: Label) -> usize {
        self.img_range().start + label.index()
    }

    pub fn txt_cue(&self, label: Label) -> usize {
        self.txt_range().start + label.index()
    }

    pub fn img_distractors(&self) -> Range<usize> {
        self.img_range().start + 2..self.img_range().end
    }

    pub fn txt_distractors(&self) -> Range<usize> {
        self.txt_range().start + 2..self.txt_range().end
    }

    /// Label indicated by a cue token of either modality, if `id` is one.
    pub fn cue_label(&self, id: usize) -> Option<Label> {
        for start in [self.img_range().start, self.txt_range().start] {
            if id == start {
                return Some(Label::Real);
            }
            if id == start + 1 {
                return Some(Label::Fake);
            }
        }
        None
    }
}
