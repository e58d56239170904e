//! The full command-line pipeline in a temporary directory: gen-data,
//! pretrain, identify-heads, train, eval, mask-sweep, export-shares.
//!
//! Pass `--full` for default sizes (several minutes); the default run uses
//! a shrunken corpus and model.

use std::path::Path;

use modality_heads::cli;

fn step(args: &[&str]) {
    println!("$ modality-heads {}", args.join(" "));
    let code = cli::run(std::iter::once("modality-heads").chain(args.iter().copied()));
    assert_eq!(code, 0, "command failed");
}

fn main() -> std::io::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let dir = std::env::temp_dir().join(format!("modality-heads-e2e-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let p = |name: &str| dir.join(name).display().to_string();

    let (corpus_spec, model_cfg, steps, run) = if full {
        ("seed=0\n", "", "300", "epochs=5\n")
    } else {
        (
            "n_train=200\nn_test=100\nseed=0\n",
            "n_layers=2\nn_query_heads=4\nffn_dim=64\n",
            "40",
            "epochs=1\nk=2\nfraction_img=0.1\nfraction_txt=0.1\n",
        )
    };
    std::fs::write(dir.join("corpus.txt"), corpus_spec)?;
    std::fs::write(dir.join("model.txt"), model_cfg)?;
    std::fs::write(dir.join("run.txt"), run)?;
    let k = if full { "4" } else { "2" };

    step(&["gen-data", "--spec", &p("corpus.txt"), "--out-dir", &p("data")]);
    step(&["pretrain", "--train", &p("data/train.jsonl"), "--model-config", &p("model.txt"), "--steps", steps, "--out", &p("base.ckpt")]);
    step(&["identify-heads", "--checkpoint", &p("base.ckpt"), "--train", &p("data/train.jsonl"), "--k", k, "--out", &p("heads.csv"), "--shares-out", &p("base_shares.csv")]);
    step(&[
        "train", "--checkpoint", &p("base.ckpt"), "--assignments", &p("heads.csv"), "--config", &p("run.txt"),
        "--train", &p("data/train.jsonl"), "--test", &p("data/test.jsonl"), "--out", &p("tuned.ckpt"), "--history", &p("history.csv"),
    ]);
    step(&["eval", "--checkpoint", &p("tuned.ckpt"), "--test", &p("data/test.jsonl"), "--out", &p("report.txt")]);
    step(&["mask-sweep", "--checkpoint", &p("tuned.ckpt"), "--assignments", &p("heads.csv"), "--test", &p("data/test.jsonl"), "--ks", &format!("0,{k}"), "--out", &p("sweep.csv")]);
    step(&["export-shares", "--checkpoint", &p("base.ckpt"), "--label", "base", "--checkpoint", &p("tuned.ckpt"), "--label", "tuned", "--data", &p("data/test.jsonl"), "--out-dir", &p("shares")]);

    println!("artifacts in {}", dir.display());
    print!("{}", std::fs::read_to_string(Path::new(&p("history.csv")))?);
    Ok(())
}
