#![allow(dead_code)]

pub mod fd;
pub mod oracles;


use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_vog"))
}

pub fn vog(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .env_remove("VOG_WORKERS")
        .output()
        .expect("binary runs")
}

pub fn vog_ok(args: &[&str], cwd: &Path) -> String {
    let out = vog(args, cwd);
    assert!(
        out.status.success(),
        "vog {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// A glyph run small enough for a few seconds of training.
pub const TINY_CONFIG: &str = r#"{
  "config_version": 1,
  "model": {
    "layers": [
      {"type": "flatten"},
      {"type": "dense", "inputs": 144, "outputs": 16},
      {"type": "relu"},
      {"type": "dense", "inputs": 16, "outputs": 4}
    ],
    "input_shape": [1, 12, 12],
    "num_classes": 4
  },
  "train": {
    "epochs": 7,
    "batch_size": 16,
    "lr_schedule": [{"start_epoch": 0, "lr": 0.001}, {"start_epoch": 3, "lr": 0.1}],
    "checkpoint_every": 1,
    "seed": 5,
    "shuffle_label_fraction": 0.0
  },
  "vog": {"stage": "late", "label_source": "predicted"},
  "data": {
    "train": {"kind": "glyphs", "glyphs": {"n": 300, "size": 12, "num_classes": 4, "noise_std": 0.1, "max_blend": 0.6, "split": "train", "seed": 1}},
    "test": {"kind": "glyphs", "glyphs": {"n": 120, "size": 12, "num_classes": 4, "noise_std": 0.1, "max_blend": 0.6, "split": "test", "seed": 2}},
    "ood": {"kind": "gaussian_ood", "n": 60, "image_shape": [1, 12, 12], "seed": 3}
  }
}
"#;

pub fn write_tiny_config(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.json");
    std::fs::write(&p, TINY_CONFIG).unwrap();
    p
}

/// Runs all six commands into `dir` (relative paths, `dir` as cwd).
pub fn run_every_command(dir: &Path) {
    write_tiny_config(dir);
    vog_ok(&["train", "--config", "tiny.json", "--out-dir", "run"], dir);
    vog_ok(&["vog", "--checkpoints", "run", "--out", "late.csv", "--workers", "1"], dir);
    vog_ok(&["vog", "--checkpoints", "run", "--stage", "early", "--out", "early.csv", "--workers", "2"], dir);
    vog_ok(&["vog", "--checkpoints", "run", "--split", "ood", "--out", "ood.csv"], dir);
    vog_ok(&["report", "--scores", "late.csv", "--early-scores", "early.csv", "--top-k", "3", "--out-dir", "report"], dir);
    vog_ok(&["ood", "--checkpoints", "run", "--out", "ood_model.json"], dir);
    vog_ok(&["ood", "--in-scores", "late.csv", "--ood-scores", "ood.csv", "--out", "ood_csv.json"], dir);
    vog_ok(&["toy", "--seed", "7", "--out-dir", "toy"], dir);
    vog_ok(&["memtest", "--config", "tiny.json", "--shuffle-fraction", "0.25", "--out-dir", "mem"], dir);
}
