//! SGD training with periodic checkpoints and optional label shuffling.

mod checkpoint;
mod shuffle;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Result, VogError};
use crate::nn::{argmax, Model, ModelSpec, Params};

pub use checkpoint::{
    decode_params, encode_params, CheckpointEntry, CheckpointSet, Manifest, Stage,
    CHECKPOINT_FORMAT_VERSION, MANIFEST_FILE,
};
pub use shuffle::{shuffle_labels, LabelShuffleRecord};

/// File written next to the manifest when labels were shuffled before training.
pub const LABEL_SHUFFLE_FILE: &str = "label_shuffle.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrStep {
    pub start_epoch: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_schedule: Vec<LrStep>,
    pub checkpoint_every: usize,
    pub seed: u64,
    #[serde(default)]
    pub shuffle_label_fraction: f64,
}

impl TrainConfig {
    pub fn constant_lr(epochs: usize, batch_size: usize, lr: f64, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            lr_schedule: vec![LrStep { start_epoch: 0, lr }],
            checkpoint_every: 1,
            seed,
            shuffle_label_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(VogError::validation(
                "epochs, batch_size and checkpoint_every must be positive",
            ));
        }
        if self.checkpoint_every > self.epochs {
            return Err(VogError::validation(format!(
                "checkpoint_every ({}) exceeds epochs ({})",
                self.checkpoint_every, self.epochs
            )));
        }
        match self.lr_schedule.first() {
            Some(step) if step.start_epoch == 0 => {}
            _ => {
                return Err(VogError::validation(
                    "lr_schedule must start with an entry at epoch 0",
                ))
            }
        }
        if self
            .lr_schedule
            .windows(2)
            .any(|w| w[1].start_epoch <= w[0].start_epoch)
        {
            return Err(VogError::validation(
                "lr_schedule start epochs must be strictly increasing",
            ));
        }
        if self.lr_schedule.iter().any(|s| !(s.lr > 0.0 && s.lr.is_finite())) {
            return Err(VogError::validation("learning rates must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.shuffle_label_fraction) {
            return Err(VogError::validation("shuffle_label_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Learning rate used during the zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .take_while(|s| s.start_epoch <= epoch)
            .last()
            .map_or(self.lr_schedule[0].lr, |s| s.lr)
    }

    /// Epochs at which a snapshot is stored: 0, every `checkpoint_every`, and the last.
    pub fn checkpoint_epochs(&self) -> Vec<usize> {
        let mut epochs: Vec<usize> = (0..=self.epochs).step_by(self.checkpoint_every).collect();
        if epochs.last() != Some(&self.epochs) {
            epochs.push(self.epochs);
        }
        epochs
    }
}

/// Mean cross-entropy and top-1 error rate (fraction) over a dataset.
pub fn evaluate(model: &Model, data: &LabeledDataset) -> Result<(f64, f64)> {
    let mut errors = 0usize;
    let mut loss = 0.0;
    for e in &data.examples {
        let logits = model.forward(&e.image)?;
        let z = logits.data();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[e.label];
        if argmax(z) != e.label {
            errors += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, errors as f64 / n))
}

/// Trains `spec` on `data` with mini-batch SGD and writes checkpoints to `out_dir`.
///
/// When `cfg.shuffle_label_fraction > 0` the labels are first reassigned with
/// [`shuffle_labels`] (seeded from `cfg.seed`) and the record is written to
/// [`LABEL_SHUFFLE_FILE`]. Output is bit-reproducible for fixed inputs.
pub fn train(
    spec: &ModelSpec,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<CheckpointSet> {
    cfg.validate()?;
    data.validate()?;
    spec.layer_shapes()?;
    if data.image_shape() != spec.input_shape {
        return Err(VogError::Shape {
            context: "training data vs model input",
            expected: spec.input_shape.to_vec(),
            got: data.image_shape().to_vec(),
        });
    }
    if let Some(bad) = data.examples.iter().find(|e| e.label >= spec.num_classes) {
        return Err(VogError::Index {
            what: "label",
            index: bad.label,
            bound: spec.num_classes,
        });
    }
    std::fs::create_dir_all(out_dir).map_err(|e| VogError::io(out_dir, e))?;

    let mut label_shuffle = None;
    let shuffled;
    let data = if cfg.shuffle_label_fraction > 0.0 {
        let (d, record) = shuffle_labels(
            data,
            cfg.shuffle_label_fraction,
            spec.num_classes,
            cfg.seed.wrapping_add(0x5eed),
        )?;
        record.save(&out_dir.join(LABEL_SHUFFLE_FILE))?;
        label_shuffle = Some(LABEL_SHUFFLE_FILE.to_string());
        shuffled = d;
        &shuffled
    } else {
        data
    };

    let mut model = Model::new(spec.clone(), Params::init(spec, cfg.seed)?)?;
    let mut set = CheckpointSet::create(out_dir, spec.clone(), cfg.clone(), label_shuffle);
    let store_at = cfg.checkpoint_epochs();
    set.store(&model, 0, evaluate(&model, data)?)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut grads = Params::zeros_like(spec);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let e = &data.examples[i];
                batch_loss += model.accumulate_loss_grad(&e.image, e.label, &mut grads)?;
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(VogError::Divergence {
                    epoch: epoch + 1,
                    batch: batch_idx,
                    lr,
                });
            }
            model
                .params_mut()
                .add_scaled(-lr / batch.len() as f64, &grads);
        }
        let done = epoch + 1;
        if store_at.contains(&done) {
            let (loss, err) = evaluate(&model, data)?;
            if !loss.is_finite() {
                return Err(VogError::Divergence {
                    epoch: done,
                    batch: 0,
                    lr,
                });
            }
            set.store(&model, done, (loss, err))?;
        }
    }
    set.write_manifest()?;
    Ok(set)
}
