//! Command-line front end. Every randomized step takes `--seed` (default 0).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{generate_corpus, read_corpus, write_corpus, CorpusSpec, SyntheticSample};
use crate::error::{Error, Result};
use crate::eval::{cue_rule_predict, evaluate, evaluate_with, gold_for, EvalReport};
use crate::heads::{
    aggregate_shares, export_heatmap, export_ranked_curve, overlap_stats, read_assignments, read_share_table,
    select_bottom_k, select_top_k, write_assignments, write_share_table, write_sweep, mask_sweep, HeadAssignments,
    ScoredHead, ShareTable,
};
use crate::kv::KvFile;
use crate::model::{load_checkpoint, save_checkpoint, Checkpoint, Group, Model, ModelConfig, Setting};
use crate::provenance::{fingerprint, write_csv};
use crate::training::{pretrain_base, train_full, write_history, AdamWConfig, PretrainConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "modality-heads", version, about = "Head-wise modality specialization on a synthetic corpus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate train/test corpus files from a corpus spec.
    GenData(GenData),
    /// Pretrain a base model on the description task.
    Pretrain(Pretrain),
    /// Rank heads by modality share and write the top-K lists.
    IdentifyHeads(IdentifyHeads),
    /// Stage-wise adapter finetuning.
    Train(Train),
    /// Three-setting macro-F1 evaluation.
    Eval(Eval),
    /// Mask ranked vs random heads and record macro F1.
    MaskSweep(MaskSweep),
    /// Write share tables, heatmaps and ranked-share curves.
    ExportShares(ExportShares),
    /// Overlap statistics between two head-assignment files.
    Stats(Stats),
    /// Grid over tau and gamma.
    Sweep(Sweep),
}

#[derive(Args, Debug)]
pub struct GenData {
    /// Corpus spec (key=value); defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct Pretrain {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Model config (key=value); defaults apply when omitted.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    steps: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
pub struct IdentifyHeads {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the share table.
    #[arg(long)]
    shares_out: Option<PathBuf>,
    /// Select the lowest-share heads instead.
    #[arg(long)]
    bottom: bool,
}

#[derive(Args, Debug)]
pub struct Train {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    assignments: PathBuf,
    /// Run config (key=value).
    #[arg(long)]
    config: PathBuf,
    /// Training corpus; falls back to the config's `corpus`.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test corpus for per-epoch evaluation.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output checkpoint holding the base and the adapters.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    history: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Predictor {
    /// The checkpoint's model (with adapters when present).
    Model,
    /// Reads the cue tokens directly; the Bayes-optimal rule.
    CueRule,
    /// Returns the gold label; a perfect oracle for pipeline checks.
    Gold,
}

#[derive(Args, Debug)]
pub struct Eval {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = Predictor::Model)]
    predictor: Predictor,
    #[arg(long, value_delimiter = ',', default_value = "multi,img_only,text_only")]
    settings: Vec<Setting>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Vocabulary size for the cue-rule predictor.
    #[arg(long, default_value_t = 96)]
    vocab_size: usize,
}

#[derive(Args, Debug)]
pub struct MaskSweep {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    assignments: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "img_only")]
    setting: Setting,
    #[arg(long, value_delimiter = ',', default_value = "0,2,4")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    n_random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportShares {
    /// One or more checkpoints; each gets a column in the ranked curves.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// Column labels, one per checkpoint.
    #[arg(long)]
    label: Vec<String>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "multi")]
    setting: Setting,
    #[arg(long, default_value_t = 8)]
    top_n: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct Stats {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Share tables rescoring `a` and `b`; the files' own scores otherwise.
    #[arg(long)]
    shares_a: Option<PathBuf>,
    #[arg(long)]
    shares_b: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Sweep {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    assignments: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6")]
    taus: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.7")]
    gammas: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn gen_data(a: &GenData) -> Result<String> {
    let mut spec = match &a.spec {
        Some(p) => CorpusSpec::read(p)?,
        None => CorpusSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let corpus = generate_corpus(&spec)?;
    create_dir(&a.out_dir)?;
    write_corpus(&a.out_dir.join("train.jsonl"), &corpus.train)?;
    write_corpus(&a.out_dir.join("test.jsonl"), &corpus.test)?;
    write_text(&a.out_dir.join("spec.txt"), &spec.to_kv_string())?;
    Ok(format!("train={} test={} dir={}\n", corpus.train.len(), corpus.test.len(), a.out_dir.display()))
}

fn pretrain(a: &Pretrain) -> Result<String> {
    let config = match &a.model_config {
        Some(p) => ModelConfig::from_kv(&KvFile::read(p)?)?,
        None => ModelConfig::default(),
    };
    let train = read_corpus(&a.train)?;
    let mut model = Model::init(config, a.seed);
    let cfg = PretrainConfig {
        steps: a.steps,
        batch_size: a.batch_size,
        optim: AdamWConfig { lr: a.lr, weight_decay: 0.0, ..Default::default() },
        seed: a.seed,
    };
    let losses = pretrain_base(&mut model, &train, &cfg)?;
    save_checkpoint(&a.out, &Checkpoint { model, adapters: None })?;
    let last = losses.last().map(|l| format!("{l:.6}")).unwrap_or_else(|| "none".into());
    Ok(format!("steps={} final_loss={last} out={}\n", a.steps, a.out.display()))
}

fn load_model(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path)
}

fn identify_heads(a: &IdentifyHeads) -> Result<String> {
    let ckpt = load_model(&a.checkpoint)?;
    let train = read_corpus(&a.train)?;
    let table = aggregate_shares(&ckpt.model, ckpt.adapters.as_ref(), &train, Setting::Multi)?;
    let mut assignments = if a.bottom { select_bottom_k(&table, a.k)? } else { select_top_k(&table, a.k)? };
    let fp = fingerprint(&format!("identify-heads\nk={}\nbottom={}\nsetting=multi\n", a.k, a.bottom));
    assignments.source = format!("{}:{}", assignments.source, fp);
    write_assignments(&a.out, &assignments, &fp)?;
    if let Some(p) = &a.shares_out {
        write_share_table(p, &table, &fp)?;
    }
    Ok(format!("k={} shared={} out={}\n", a.k, assignments.shared().len(), a.out.display()))
}

fn training_corpus(explicit: &Option<PathBuf>, run: &RunConfig) -> Result<Vec<SyntheticSample>> {
    let path = explicit
        .as_ref()
        .or(run.corpus.as_ref())
        .ok_or_else(|| Error::Usage("no training corpus: pass --train or set corpus= in the run config".into()))?;
    read_corpus(path)
}

fn assignments_for_run(base: &Model, train: &[SyntheticSample], given: HeadAssignments, run: &RunConfig) -> Result<HeadAssignments> {
    if run.ablation.uses_bottom_k() {
        let table = aggregate_shares(base, None, train, Setting::Multi)?;
        select_bottom_k(&table, run.k)
    } else {
        Ok(given)
    }
}

fn train(a: &Train) -> Result<String> {
    let mut run = RunConfig::read(&a.config)?;
    if let Some(seed) = a.seed {
        run.seed = seed;
    }
    let base = load_model(&a.checkpoint)?.model;
    let train = training_corpus(&a.train, &run)?;
    let test = a.test.as_ref().map(|p| read_corpus(p)).transpose()?;
    let assignments = assignments_for_run(&base, &train, read_assignments(&a.assignments)?, &run)?;
    let outcome = train_full(&base, &train, test.as_deref(), &assignments, &run)?;
    let fp = fingerprint(&run.to_kv_string());
    write_history(&a.history, &outcome.history, &fp)?;
    save_checkpoint(&a.out, &Checkpoint { model: base, adapters: Some(outcome.adapters) })?;
    let mut msg = format!("epochs={} history={} out={}\n", run.epochs, a.history.display(), a.out.display());
    if let Some(r) = &outcome.final_report {
        msg.push_str(&r.to_text());
    }
    Ok(msg)
}

fn eval(a: &Eval) -> Result<String> {
    let test = read_corpus(&a.test)?;
    let report: EvalReport = match a.predictor {
        Predictor::Model => {
            let path = a.checkpoint.as_ref().ok_or_else(|| Error::Usage("--checkpoint is required with --predictor model".into()))?;
            let ckpt = load_model(path)?;
            evaluate(&ckpt.model, ckpt.adapters.as_ref(), &test, &a.settings)?
        }
        Predictor::CueRule => {
            let vocab = crate::tokens::Vocab::new(a.vocab_size)?;
            evaluate_with(&test, &a.settings, |s, setting| cue_rule_predict(s, setting, &vocab))?
        }
        Predictor::Gold => evaluate_with(&test, &a.settings, |s, setting| {
            gold_for(s, setting).ok_or_else(|| Error::Invariant("gold label vanished".into()))
        })?,
    };
    let text = report.to_text();
    if let Some(p) = &a.out {
        write_text(p, &text)?;
    }
    Ok(text)
}

fn mask_sweep_cmd(a: &MaskSweep) -> Result<String> {
    let ckpt = load_model(&a.checkpoint)?;
    let assignments = read_assignments(&a.assignments)?;
    let test = read_corpus(&a.test)?;
    let rows = mask_sweep(&ckpt.model, ckpt.adapters.as_ref(), &test, &assignments, &a.ks, a.n_random, a.setting, a.seed)?;
    let ks: Vec<String> = a.ks.iter().map(usize::to_string).collect();
    let fp = fingerprint(&format!(
        "mask-sweep\nsetting={}\nks={}\nn_random={}\nseed={}\n",
        a.setting,
        ks.join(","),
        a.n_random,
        a.seed
    ));
    write_sweep(&a.out, &rows, a.setting, &fp)?;
    Ok(format!("rows={} out={}\n", rows.len(), a.out.display()))
}

fn export_shares(a: &ExportShares) -> Result<String> {
    if !a.label.is_empty() && a.label.len() != a.checkpoint.len() {
        return Err(Error::Usage("give one --label per --checkpoint".into()));
    }
    let data = read_corpus(&a.data)?;
    create_dir(&a.out_dir)?;
    let fp = fingerprint(&format!("export-shares\nsetting={}\ntop_n={}\n", a.setting, a.top_n));
    let mut tables: Vec<(String, ShareTable)> = Vec::new();
    for (i, path) in a.checkpoint.iter().enumerate() {
        let ckpt = load_model(path)?;
        let label = a.label.get(i).cloned().unwrap_or_else(|| format!("m{i}"));
        let table = aggregate_shares(&ckpt.model, ckpt.adapters.as_ref(), &data, a.setting)?;
        write_share_table(&a.out_dir.join(format!("shares_{label}.csv")), &table, &fp)?;
        for group in [Group::Img, Group::Text] {
            export_heatmap(&table, group, &a.out_dir.join(format!("heatmap_{label}_{group}.csv")), &fp)?;
        }
        tables.push((label, table));
    }
    let named: Vec<(String, &ShareTable)> = tables.iter().map(|(l, t)| (l.clone(), t)).collect();
    for group in [Group::Img, Group::Text] {
        export_ranked_curve(&named, group, a.top_n, &a.out_dir.join(format!("ranked_{group}.csv")), &fp)?;
    }
    Ok(format!("tables={} dir={}\n", tables.len(), a.out_dir.display()))
}

fn rescored(list: &[ScoredHead], table: Option<&ShareTable>, group: Group) -> Vec<ScoredHead> {
    list.iter()
        .map(|s| ScoredHead { head: s.head, score: table.map_or(s.score, |t| t.get(s.head, group)) })
        .collect()
}

fn stats(a: &Stats) -> Result<String> {
    let (la, lb) = (read_assignments(&a.a)?, read_assignments(&a.b)?);
    let ta = a.shares_a.as_ref().map(|p| read_share_table(p)).transpose()?;
    let tb = a.shares_b.as_ref().map(|p| read_share_table(p)).transpose()?;
    let mut lines = Vec::new();
    let mut text = String::new();
    for group in [Group::Img, Group::Text] {
        let s = overlap_stats(
            &rescored(la.for_group(group), ta.as_ref(), group),
            &rescored(lb.for_group(group), tb.as_ref(), group),
        )?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        lines.push(format!("{group},{},{},{},{},{}", la.k, s.overlap, s.jaccard, cell(s.mean_delta), cell(s.median_delta)));
        text.push_str(&format!(
            "modality={group} k={} overlap={} jaccard={} mean_delta={} median_delta={}\n",
            la.k,
            s.overlap,
            s.jaccard,
            s.mean_delta.map_or("undefined".into(), |v| v.to_string()),
            s.median_delta.map_or("undefined".into(), |v| v.to_string())
        ));
    }
    if let Some(p) = &a.out {
        let fp = fingerprint("stats\n");
        write_csv(p, &fp, "modality,k,overlap,jaccard,mean_delta,median_delta", &lines)?;
    }
    Ok(text)
}

fn sweep(a: &Sweep) -> Result<String> {
    let run = RunConfig::read(&a.config)?;
    let base = load_model(&a.checkpoint)?.model;
    let train = training_corpus(&a.train, &run)?;
    let test = read_corpus(&a.test)?;
    let assignments = assignments_for_run(&base, &train, read_assignments(&a.assignments)?, &run)?;
    let mut rows = Vec::new();
    for &tau in &a.taus {
        for &gamma in &a.gammas {
            let mut cell = run.clone();
            cell.hms.tau = tau;
            cell.ukr.gamma = gamma;
            cell.eval_each_epoch = false;
            let out = train_full(&base, &train, Some(&test), &assignments, &cell)?;
            let r = out.final_report.expect("test split given");
            let f = |s| r.f1(s).map(|v| v.to_string()).unwrap_or_default();
            rows.push(format!("{tau},{gamma},{},{},{}", f(Setting::Multi), f(Setting::ImgOnly), f(Setting::TextOnly)));
        }
    }
    let fp = fingerprint(&format!("sweep\n{}", run.to_kv_string()));
    write_csv(&a.out, &fp, "tau,gamma,f1_multi,f1_img_only,f1_text_only", &rows)?;
    Ok(format!("cells={} out={}\n", rows.len(), a.out.display()))
}

pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Pretrain(a) => pretrain(a),
        Command::IdentifyHeads(a) => identify_heads(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::MaskSweep(a) => mask_sweep_cmd(a),
        Command::ExportShares(a) => export_shares(a),
        Command::Stats(a) => stats(a),
        Command::Sweep(a) => sweep(a),
    }
}

/// Parses `args`, runs the command and returns the exit status. Failures
/// print `error: kind=<kind> msg=<message>` on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                let first = e.to_string().lines().next().unwrap_or("").to_string();
                eprintln!("error: kind=usage msg={first}");
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: kind={} msg={}", e.kind(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
