use rand::seq::SliceRandom;

use super::SyntheticSample;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Fractions of training samples whose unimodal labels stay visible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub fraction_img: f64,
    pub fraction_txt: f64,
}

impl Budget {
    pub fn uniform(fraction: f64) -> Self {
        Self { fraction_img: fraction, fraction_txt: fraction }
    }
}

/// `floor(fraction * n)`, at least 1 when the fraction is positive.
pub fn revealed_count(fraction: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("budget fraction {fraction} outside [0, 1]")));
    }
    if fraction == 0.0 || n == 0 {
        return Ok(0);
    }
    Ok(((fraction * n as f64).floor() as usize).clamp(1, n))
}

fn keep(n: usize, count: usize, seed: u64, modality: u64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[0xB0D6_E7, modality]));
    let mut mask = vec![false; n];
    for &i in &idx[..count] {
        mask[i] = true;
    }
    mask
}

/// Hides `y_img` outside a uniformly chosen `fraction_img` subset, and
/// `y_txt` likewise with an independent draw. `y` is never touched.
pub fn apply_budget(
    train: &[SyntheticSample],
    budget: Budget,
    seed: u64,
) -> Result<Vec<SyntheticSample>> {
    let n = train.len();
    let img = keep(n, revealed_count(budget.fraction_img, n)?, seed, 0);
    let txt = keep(n, revealed_count(budget.fraction_txt, n)?, seed, 1);
    Ok(train
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            if !img[i] {
                s.y_img = None;
            }
            if !txt[i] {
                s.y_txt = None;
            }
            s
        })
        .collect())
}
