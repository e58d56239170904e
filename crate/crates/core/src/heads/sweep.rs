use std::path::Path;

use rand::seq::index::sample;

use super::HeadAssignments;
use crate::data::SyntheticSample;
use crate::error::{Error, Result};
use crate::eval::evaluate_masked;
use crate::model::{AdapterSet, Group, HeadId, HeadMask, Model, Setting};
use crate::provenance::write_csv;
use crate::rng;

/// Macro F1 with the top-`k` ranked heads masked, against the mean and
/// population std over `n_random` random `k`-subsets of all heads.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub ranked_f1: f64,
    pub random_f1_mean: f64,
    pub random_f1_std: f64,
}

fn f1_with_mask(
    model: &Model,
    adapters: Option<&AdapterSet>,
    test: &[SyntheticSample],
    setting: Setting,
    heads: &[HeadId],
) -> Result<f64> {
    let mask = HeadMask::new(&model.config, heads.iter().copied())?;
    let report = evaluate_masked(model, adapters, &mask, test, &[setting])?;
    report
        .f1(setting)
        .ok_or_else(|| Error::invalid(format!("no evaluable samples under {setting}")))
}

/// Sweeps the masked-head budget over `ks` under a unimodal `setting`,
/// masking the matching modality's ranked list.
#[allow(clippy::too_many_arguments)]
pub fn mask_sweep(
    model: &Model,
    adapters: Option<&AdapterSet>,
    test: &[SyntheticSample],
    assignments: &HeadAssignments,
    ks: &[usize],
    n_random: usize,
    setting: Setting,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let group = match setting {
        Setting::ImgOnly => Group::Img,
        Setting::TextOnly => Group::Text,
        Setting::Multi => return Err(Error::invalid("mask sweep needs img_only or text_only")),
    };
    if n_random == 0 {
        return Err(Error::invalid("n_random must be at least 1"));
    }
    let ranked: Vec<HeadId> = assignments.for_group(group).iter().map(|s| s.head).collect();
    let all: Vec<HeadId> = model.config.heads().collect();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        if k > all.len() {
            return Err(Error::invalid(format!("k = {k} exceeds {} heads", all.len())));
        }
        if k > ranked.len() {
            return Err(Error::invalid(format!("k = {k} exceeds the {}-head ranked list", ranked.len())));
        }
        let ranked_f1 = f1_with_mask(model, adapters, test, setting, &ranked[..k])?;
        let mut draws = Vec::with_capacity(n_random);
        for d in 0..n_random {
            let mut r = rng::stream(seed, &[k as u64, d as u64]);
            let pick: Vec<HeadId> = sample(&mut r, all.len(), k).into_iter().map(|i| all[i]).collect();
            draws.push(f1_with_mask(model, adapters, test, setting, &pick)?);
        }
        let mean = draws.iter().sum::<f64>() / n_random as f64;
        let var = draws.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n_random as f64;
        rows.push(SweepRow { k, ranked_f1, random_f1_mean: mean, random_f1_std: var.sqrt() });
    }
    Ok(rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow], setting: Setting, fingerprint: &str) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{}", r.k, r.ranked_f1, r.random_f1_mean, r.random_f1_std))
        .collect();
    write_csv(path, fingerprint, &format!("# setting={setting}\nk,ranked_f1,random_f1_mean,random_f1_std"), &lines)
}
