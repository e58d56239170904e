use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::data::SyntheticSample;
use crate::error::{Error, Result};
use crate::tokens::{PREFIX, SUFFIX};

/// Token group of a position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Ins,
    Img,
    Text,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Ins, Group::Img, Group::Text];

    pub fn index(self) -> usize {
        match self {
            Group::Ins => 0,
            Group::Img => 1,
            Group::Text => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Ins => "ins",
            Group::Img => "img",
            Group::Text => "text",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ins" => Ok(Group::Ins),
            "img" => Ok(Group::Img),
            "text" | "txt" => Ok(Group::Text),
            other => Err(Error::invalid(format!("unknown group {other:?}"))),
        }
    }
}

/// Which modalities are present at inference/training time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    Multi,
    ImgOnly,
    TextOnly,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Multi, Setting::ImgOnly, Setting::TextOnly];

    pub fn has_img(self) -> bool {
        self != Setting::TextOnly
    }

    pub fn has_text(self) -> bool {
        self != Setting::ImgOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::Multi => "multi",
            Setting::ImgOnly => "img_only",
            Setting::TextOnly => "text_only",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi" => Ok(Setting::Multi),
            "img_only" | "img" => Ok(Setting::ImgOnly),
            "text_only" | "text" | "txt" => Ok(Setting::TextOnly),
            other => Err(Error::invalid(format!("unknown setting {other:?}"))),
        }
    }
}

/// A finetuning stage. Each epoch runs IMG, TEXT, MULTI in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Img,
    Text,
    Multi,
}

impl Stage {
    pub const ORDER: [Stage; 3] = [Stage::Img, Stage::Text, Stage::Multi];

    /// The input setting the stage trains on.
    pub fn setting(self) -> Setting {
        match self {
            Stage::Img => Setting::ImgOnly,
            Stage::Text => Setting::TextOnly,
            Stage::Multi => Setting::Multi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Img => "img",
            Stage::Text => "text",
            Stage::Multi => "multi",
        }
    }

    /// Whether heads critical for `group` are trained freely in this stage.
    pub fn matches(self, group: Group) -> bool {
        matches!((self, group), (Stage::Img, Group::Img) | (Stage::Text, Group::Text))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "img" => Ok(Stage::Img),
            "text" | "txt" => Ok(Stage::Text),
            "multi" => Ok(Stage::Multi),
            other => Err(Error::invalid(format!("unknown stage {other:?}"))),
        }
    }
}

/// `[INS prefix][IMG block][TEXT block][INS suffix]`; the final position is
/// the query position whose attention rows are traced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub token_ids: Vec<usize>,
    pub group_tags: Vec<Group>,
    pub query_position: usize,
    pub setting: Setting,
    img: Range<usize>,
    text: Range<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Contiguous positions of a group. INS is split in two and returns the
    /// prefix only; use [`Self::group_tags`] for exact membership.
    pub fn block(&self, group: Group) -> Range<usize> {
        match group {
            Group::Img => self.img.clone(),
            Group::Text => self.text.clone(),
            Group::Ins => 0..PREFIX.len(),
        }
    }

    pub fn count(&self, group: Group) -> usize {
        self.group_tags.iter().filter(|&&g| g == group).count()
    }

    /// The sequence followed by `tokens` (tagged INS), for language-model
    /// style training. The query position stays where it was.
    pub fn with_continuation(&self, tokens: &[usize]) -> Self {
        let mut out = self.clone();
        out.token_ids.extend_from_slice(tokens);
        out.group_tags.extend(std::iter::repeat_n(Group::Ins, tokens.len()));
        out
    }
}

pub fn build_sequence(sample: &SyntheticSample, setting: Setting) -> Result<TokenSequence> {
    if setting.has_img() && sample.img_tokens.is_empty() {
        return Err(Error::invalid(format!("sample {} has no image segment for {setting}", sample.id)));
    }
    if setting.has_text() && sample.txt_tokens.is_empty() {
        return Err(Error::invalid(format!("sample {} has no text segment for {setting}", sample.id)));
    }
    let img: &[usize] = if setting.has_img() { &sample.img_tokens } else { &[] };
    let text: &[usize] = if setting.has_text() { &sample.txt_tokens } else { &[] };

    let mut token_ids = Vec::with_capacity(PREFIX.len() + img.len() + text.len() + SUFFIX.len());
    let mut group_tags = Vec::with_capacity(token_ids.capacity());
    token_ids.extend_from_slice(&PREFIX);
    group_tags.extend(std::iter::repeat_n(Group::Ins, PREFIX.len()));
    let img_start = token_ids.len();
    token_ids.extend_from_slice(img);
    group_tags.extend(std::iter::repeat_n(Group::Img, img.len()));
    let text_start = token_ids.len();
    token_ids.extend_from_slice(text);
    group_tags.extend(std::iter::repeat_n(Group::Text, text.len()));
    let text_end = token_ids.len();
    token_ids.extend_from_slice(&SUFFIX);
    group_tags.extend(std::iter::repeat_n(Group::Ins, SUFFIX.len()));

    Ok(TokenSequence {
        query_position: token_ids.len() - 1,
        token_ids,
        group_tags,
        setting,
        img: img_start..text_start,
        text: text_start..text_end,
    })
}
