use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::optim::{AdamW, AdamWConfig};
use super::stage::{stage_label, train_stage, StageLog, StageSettings};
use super::ukr::UkrConfig;
use crate::data::{apply_budget, Budget, SyntheticSample};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::heads::HeadAssignments;
use crate::hms::HmsConfig;
use crate::kv::KvFile;
use crate::model::{AdapterSet, Model, Setting, Stage};
use crate::provenance::write_csv;

/// Which parts of the method are switched off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ablation {
    #[default]
    None,
    NoHms,
    NoUkr,
    /// Bottom-K heads stand in for the critical ones.
    NoCritical,
    /// Neither penalty nor shrinking: plain stage-wise finetuning.
    Naive,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [Ablation::None, Ablation::NoHms, Ablation::NoUkr, Ablation::NoCritical, Ablation::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::NoHms => "no_hms",
            Ablation::NoUkr => "no_ukr",
            Ablation::NoCritical => "no_critical",
            Ablation::Naive => "naive",
        }
    }

    pub fn uses_bottom_k(self) -> bool {
        self == Ablation::NoCritical
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ablation {s:?}")))
    }
}

/// Finetuning run parameters, read from a `key=value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub budget: Budget,
    pub hms: HmsConfig,
    pub ukr: UkrConfig,
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Small models want a larger rate than the 1e-4 typical for big ones.
    pub optim: AdamWConfig,
    pub seed: u64,
    pub ablation: Ablation,
    pub eval_each_epoch: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            budget: Budget::uniform(0.01),
            hms: HmsConfig::default(),
            ukr: UkrConfig::default(),
            k: 4,
            epochs: 5,
            batch_size: 16,
            optim: AdamWConfig::default(),
            seed: 0,
            ablation: Ablation::None,
            eval_each_epoch: true,
        }
    }
}

const RUN_KEYS: &[&str] = &[
    "corpus", "fraction_img", "fraction_txt", "tau", "gamma", "lambda_lb", "k", "epochs", "batch_size", "lr",
    "weight_decay", "seed", "ablation", "eval_each_epoch",
];

impl RunConfig {
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.check_keys(RUN_KEYS)?;
        let d = Self::default();
        let cfg = Self {
            corpus: kv.raw("corpus").map(PathBuf::from),
            budget: Budget {
                fraction_img: kv.get_or("fraction_img", d.budget.fraction_img)?,
                fraction_txt: kv.get_or("fraction_txt", d.budget.fraction_txt)?,
            },
            hms: HmsConfig { tau: kv.get_or("tau", d.hms.tau)?, lambda_lb: kv.get_or("lambda_lb", d.hms.lambda_lb)? },
            ukr: UkrConfig { gamma: kv.get_or("gamma", d.ukr.gamma)? },
            k: kv.get_or("k", d.k)?,
            epochs: kv.get_or("epochs", d.epochs)?,
            batch_size: kv.get_or("batch_size", d.batch_size)?,
            optim: AdamWConfig {
                lr: kv.get_or("lr", d.optim.lr)?,
                weight_decay: kv.get_or("weight_decay", d.optim.weight_decay)?,
                ..d.optim
            },
            seed: kv.get_or("seed", d.seed)?,
            ablation: kv.get_or("ablation", d.ablation)?,
            eval_each_epoch: kv.get_or("eval_each_epoch", d.eval_each_epoch)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.hms.validate()?;
        self.ukr.validate()?;
        for f in [self.budget.fraction_img, self.budget.fraction_txt] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("budget fraction {f} outside [0, 1]")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.optim.lr > 0.0) {
            return Err(Error::invalid("lr must be positive"));
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        if let Some(c) = &self.corpus {
            s.push_str(&format!("corpus={}\n", c.display()));
        }
        s.push_str(&format!(
            "fraction_img={}\nfraction_txt={}\ntau={}\ngamma={}\nlambda_lb={}\nk={}\nepochs={}\nbatch_size={}\nlr={}\nweight_decay={}\nseed={}\nablation={}\neval_each_epoch={}\n",
            self.budget.fraction_img,
            self.budget.fraction_txt,
            self.hms.tau,
            self.ukr.gamma,
            self.hms.lambda_lb,
            self.k,
            self.epochs,
            self.batch_size,
            self.optim.lr,
            self.optim.weight_decay,
            self.seed,
            self.ablation,
            self.eval_each_epoch
        ));
        s
    }

    /// Penalty settings after the ablation is applied.
    pub fn effective_hms(&self) -> HmsConfig {
        match self.ablation {
            Ablation::NoHms | Ablation::Naive => HmsConfig { lambda_lb: 0.0, ..self.hms },
            _ => self.hms,
        }
    }

    pub fn effective_ukr(&self) -> UkrConfig {
        match self.ablation {
            Ablation::NoUkr | Ablation::Naive => UkrConfig { gamma: 1.0 },
            _ => self.ukr,
        }
    }
}

/// One `(epoch, stage)` line of the training history. F1 columns are set
/// on the epoch's last stage when the test split was evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub stage: Stage,
    pub n_samples: usize,
    pub mean_task_loss: Option<f64>,
    pub mean_lb_loss: Option<f64>,
    pub f1: Option<[Option<f64>; 3]>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub adapters: AdapterSet,
    pub history: Vec<HistoryRow>,
    pub stage_logs: Vec<StageLog>,
    /// Evaluation after the final epoch, when a test split was given.
    pub final_report: Option<EvalReport>,
}

/// Samples each stage trains on: the revealed image and text subsets and
/// the whole multimodal set.
pub fn stage_data(train: &[SyntheticSample], stage: Stage) -> Vec<SyntheticSample> {
    train.iter().filter(|s| stage_label(s, stage).is_some()).cloned().collect()
}

fn f1_triplet(r: &EvalReport) -> [Option<f64>; 3] {
    [r.f1(Setting::Multi), r.f1(Setting::ImgOnly), r.f1(Setting::TextOnly)]
}

/// Stage-wise finetuning of fresh adapters on a frozen base. The unimodal
/// labels of `train` are first hidden outside the run's budget.
pub fn train_full(
    base: &Model,
    train: &[SyntheticSample],
    test: Option<&[SyntheticSample]>,
    assignments: &HeadAssignments,
    run: &RunConfig,
) -> Result<TrainOutcome> {
    run.validate()?;
    if assignments.img.len() != run.k || assignments.txt.len() != run.k {
        return Err(Error::invalid(format!(
            "assignments hold {}/{} heads, run expects K = {}",
            assignments.img.len(),
            assignments.txt.len(),
            run.k
        )));
    }
    for s in assignments.img.iter().chain(&assignments.txt) {
        base.config.check_head(s.head)?;
    }
    let frozen_assignments = assignments.clone();
    let budgeted = apply_budget(train, run.budget, run.seed)?;
    let data: Vec<(Stage, Vec<SyntheticSample>)> =
        Stage::ORDER.iter().map(|&st| (st, stage_data(&budgeted, st))).collect();

    let mut adapters = AdapterSet::init(&base.config, run.seed);
    let mut opt = AdamW::new(run.optim, &adapters.named().iter().map(|(_, t)| *t).collect::<Vec<_>>());
    let settings = StageSettings {
        assignments,
        hms: run.effective_hms(),
        ukr: run.effective_ukr(),
        batch_size: run.batch_size,
        seed: run.seed,
    };
    let mut history = Vec::new();
    let mut stage_logs = Vec::new();
    let mut final_report = None;
    for epoch in 0..run.epochs {
        for (stage, samples) in &data {
            let log = train_stage(base, &mut adapters, &mut opt, *stage, samples, &settings, epoch)?;
            history.push(HistoryRow {
                epoch,
                stage: *stage,
                n_samples: log.n_samples,
                mean_task_loss: log.mean_task_loss(),
                mean_lb_loss: log.mean_lb_loss(),
                f1: None,
            });
            stage_logs.push(log);
        }
        if *assignments != frozen_assignments {
            return Err(Error::Invariant("head assignments changed during training".into()));
        }
        let last = epoch + 1 == run.epochs;
        if let Some(test) = test {
            if run.eval_each_epoch || last {
                let report = evaluate(base, Some(&adapters), test, &Setting::ALL)?;
                history.last_mut().expect("three stages per epoch").f1 = Some(f1_triplet(&report));
                if last {
                    final_report = Some(report);
                }
            }
        }
    }
    Ok(TrainOutcome { adapters, history, stage_logs, final_report })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_history(path: &Path, history: &[HistoryRow], fingerprint: &str) -> Result<()> {
    let rows: Vec<String> = history
        .iter()
        .map(|h| {
            let f1 = h.f1.unwrap_or([None; 3]);
            format!(
                "{},{},{},{},{},{},{},{}",
                h.epoch,
                h.stage,
                h.n_samples,
                opt_cell(h.mean_task_loss),
                opt_cell(h.mean_lb_loss),
                opt_cell(f1[0]),
                opt_cell(f1[1]),
                opt_cell(f1[2])
            )
        })
        .collect();
    write_csv(path, fingerprint, "epoch,stage,n_samples,mean_task_loss,mean_lb_loss,f1_multi,f1_img_only,f1_text_only", &rows)
}
