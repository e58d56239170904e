//! Macro F1 and the three-setting evaluation protocol.

use std::fmt::Write as _;

use crate::data::SyntheticSample;
use crate::error::{Error, Result};
use crate::model::{build_sequence, forward_trace, predict_label, AdapterSet, HeadMask, Model, Setting};
use crate::tokens::{Label, Vocab};

/// Counts indexed `[gold][pred]` by [`Label::index`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub counts: [[usize; 2]; 2],
}

impl Confusion {
    pub fn from_pairs(preds: &[Label], golds: &[Label]) -> Result<Self> {
        if preds.len() != golds.len() {
            return Err(Error::invalid(format!("{} predictions vs {} golds", preds.len(), golds.len())));
        }
        let mut c = Self::default();
        for (p, g) in preds.iter().zip(golds) {
            c.counts[g.index()][p.index()] += 1;
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn class(&self, label: Label) -> ClassMetrics {
        let c = label.index();
        let tp = self.counts[c][c] as f64;
        let predicted = (self.counts[0][c] + self.counts[1][c]) as f64;
        let actual = (self.counts[c][0] + self.counts[c][1]) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ClassMetrics { precision, recall, f1 }
    }

    pub fn macro_f1(&self) -> f64 {
        (self.class(Label::Real).f1 + self.class(Label::Fake).f1) / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted mean of the REAL and FAKE F1 scores. A class that is never
/// predicted and never gold scores 0.
pub fn macro_f1(preds: &[Label], golds: &[Label]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::invalid("macro_f1 of no samples"));
    }
    Ok(Confusion::from_pairs(preds, golds)?.macro_f1())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SettingReport {
    pub setting: Setting,
    pub macro_f1: f64,
    pub real: ClassMetrics,
    pub fake: ClassMetrics,
    pub confusion: Confusion,
    pub n: usize,
    /// Samples skipped because the setting's gold label is hidden.
    pub excluded: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub reports: Vec<SettingReport>,
    /// Settings with no evaluable sample.
    pub absent: Vec<Setting>,
}

impl EvalReport {
    pub fn get(&self, setting: Setting) -> Option<&SettingReport> {
        self.reports.iter().find(|r| r.setting == setting)
    }

    pub fn f1(&self, setting: Setting) -> Option<f64> {
        self.get(setting).map(|r| r.macro_f1)
    }

    /// `key=value` lines, one per setting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let c = r.confusion.counts;
            writeln!(
                out,
                "setting={} n={} excluded={} macro_f1={:.6} real_p={:.6} real_r={:.6} real_f1={:.6} fake_p={:.6} fake_r={:.6} fake_f1={:.6} tn={} fp={} fn={} tp={}",
                r.setting, r.n, r.excluded, r.macro_f1, r.real.precision, r.real.recall, r.real.f1,
                r.fake.precision, r.fake.recall, r.fake.f1, c[0][0], c[0][1], c[1][0], c[1][1]
            )
            .unwrap();
        }
        for s in &self.absent {
            writeln!(out, "setting={s} absent=true").unwrap();
        }
        out
    }
}

/// Gold target under a setting: `y`, `y_img` or `y_txt`.
pub fn gold_for(sample: &SyntheticSample, setting: Setting) -> Option<Label> {
    match setting {
        Setting::Multi => Some(sample.y),
        Setting::ImgOnly => sample.y_img,
        Setting::TextOnly => sample.y_txt,
    }
}

pub fn evaluate_with<F>(test: &[SyntheticSample], settings: &[Setting], mut predict: F) -> Result<EvalReport>
where
    F: FnMut(&SyntheticSample, Setting) -> Result<Label>,
{
    let mut report = EvalReport::default();
    for &setting in settings {
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        for s in test {
            if let Some(gold) = gold_for(s, setting) {
                preds.push(predict(s, setting)?);
                golds.push(gold);
            }
        }
        if preds.is_empty() {
            report.absent.push(setting);
            continue;
        }
        let confusion = Confusion::from_pairs(&preds, &golds)?;
        report.reports.push(SettingReport {
            setting,
            macro_f1: confusion.macro_f1(),
            real: confusion.class(Label::Real),
            fake: confusion.class(Label::Fake),
            confusion,
            n: preds.len(),
            excluded: test.len() - preds.len(),
        });
    }
    Ok(report)
}

/// Reads each present segment's cue token and combines the cue labels with
/// the OR rule. Bayes-optimal for unimodal targets and exact on a corpus
/// with cue strength 1.
pub fn cue_rule_predict(sample: &SyntheticSample, setting: Setting, vocab: &Vocab) -> Result<Label> {
    let cue = |tokens: &[usize], range: std::ops::Range<usize>| {
        tokens
            .iter()
            .find_map(|&t| if range.contains(&t) { vocab.cue_label(t) } else { None })
            .ok_or_else(|| Error::invalid(format!("sample {} has a segment without a cue", sample.id)))
    };
    let img = || cue(&sample.img_tokens, vocab.img_range());
    let txt = || cue(&sample.txt_tokens, vocab.txt_range());
    Ok(match setting {
        Setting::ImgOnly => img()?,
        Setting::TextOnly => txt()?,
        Setting::Multi => img()?.or(txt()?),
    })
}

pub fn evaluate(
    model: &Model,
    adapters: Option<&AdapterSet>,
    test: &[SyntheticSample],
    settings: &[Setting],
) -> Result<EvalReport> {
    evaluate_masked(model, adapters, &HeadMask::none(), test, settings)
}

pub fn evaluate_masked(
    model: &Model,
    adapters: Option<&AdapterSet>,
    mask: &HeadMask,
    test: &[SyntheticSample],
    settings: &[Setting],
) -> Result<EvalReport> {
    evaluate_with(test, settings, |s, setting| {
        let seq = build_sequence(s, setting)?;
        Ok(predict_label(&forward_trace(model, adapters, &seq, mask)?))
    })
}
