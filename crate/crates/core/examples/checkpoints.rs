//! Train on blobs, reopen the checkpoint directory and select stages.
//!
//! `cargo run --release --example checkpoints`

use vog::data::{make_blobs, BlobConfig};
use vog::nn::ModelSpec;
use vog::training::{train, CheckpointSet, Stage, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train_set, _) = make_blobs(&BlobConfig::default())?;
    let dir = tempfile::tempdir()?;
    let mut cfg = TrainConfig::constant_lr(10, 32, 0.05, 1);
    cfg.checkpoint_every = 2;
    train(&ModelSpec::mlp([1, 1, 2], &[8], 2), &train_set, &cfg, dir.path())?;

    let cs = CheckpointSet::open(dir.path())?;
    println!("epochs on disk: {:?}", cs.epochs());
    for stage in [Stage::Early, Stage::Late, Stage::All] {
        println!("{:<5} -> {:?}", stage.as_str(), cs.select_stage(stage)?.epochs());
    }
    let last = cs.final_entry()?;
    println!("final checkpoint {} at epoch {} ({} parameters)", last.path, last.epoch, cs.load_params(last)?.tensors().map(|t| t.len()).sum::<usize>());
    Ok(())
}
