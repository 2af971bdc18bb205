//! End-to-end experiment pipelines: the toy boundary study, the glyph
//! benchmark run used for decile, stage-flip, stability and OoD analyses, and
//! the shuffled-label memorization test.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{make_blobs, make_glyphs, BlobConfig, GlyphConfig, LabeledDataset, Split};
use crate::engine::{
    class_stats, compute_vog, normalize_with, score_examples, LabelSource, VogOptions, VogRecord,
};
use crate::error::{Result, VogError};
use crate::evaluation::{
    boundary_distance_analysis, msp_scores, ood_metrics, ood_percentile_representation,
    vog_in_scores, welch_ttest_samples, Correlation, OodMetrics, QuartileRow, WelchResult,
};
use crate::nn::ModelSpec;
use crate::training::{evaluate, train, CheckpointSet, LrStep, Stage, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub blobs: BlobConfig,
    pub hidden: usize,
    pub train: TrainConfig,
    pub stage: Stage,
    pub label_source: LabelSource,
}

impl ToyConfig {
    /// Two clusters, a 10-unit hidden layer, 15 epochs of SGD with a
    /// checkpoint after every epoch. `seed` drives both data and training.
    pub fn new(seed: u64) -> Self {
        Self {
            blobs: BlobConfig {
                seed,
                ..BlobConfig::default()
            },
            hidden: 10,
            train: TrainConfig::constant_lr(15, 32, 0.01, seed),
            stage: Stage::All,
            label_source: LabelSource::True,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub n_train: usize,
    pub n_test: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub stage: Stage,
    pub label_source: LabelSource,
    /// Normalized VoG against distance to the decision boundary, test set.
    pub correlation: Option<Correlation>,
    pub undefined_reason: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ToyOutcome {
    pub report: ToyReport,
    pub test: LabeledDataset,
    pub records: Vec<VogRecord>,
    pub distances: Vec<f64>,
}

/// Trains the toy MLP (checkpoints under `out_dir`), scores the test set and
/// relates VoG to boundary distance.
pub fn run_toy(cfg: &ToyConfig, out_dir: &Path, workers: usize) -> Result<ToyOutcome> {
    let (train_set, test_set) = make_blobs(&cfg.blobs)?;
    let spec = ModelSpec::mlp([1, 1, 2], &[cfg.hidden], 2);
    let cs = train(&spec, &train_set, &cfg.train, out_dir)?;
    let model = cs.final_model()?;
    let (_, train_error) = evaluate(&model, &train_set)?;
    let (_, test_error) = evaluate(&model, &test_set)?;
    let opts = VogOptions::new(cfg.label_source, cfg.stage).with_workers(workers);
    let records = compute_vog(&cs, &test_set, opts)?;
    let analysis = boundary_distance_analysis(&model, &test_set, &records)?;
    Ok(ToyOutcome {
        report: ToyReport {
            n_train: train_set.len(),
            n_test: test_set.len(),
            train_error,
            test_error,
            stage: cfg.stage,
            label_source: cfg.label_source,
            correlation: analysis.correlation,
            undefined_reason: analysis.undefined_reason,
        },
        test: test_set,
        records,
        distances: analysis.distances,
    })
}

/// A glyph train/test pair plus the network and schedule trained on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlyphExperiment {
    pub train_data: GlyphConfig,
    pub test_data: GlyphConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
}

impl GlyphExperiment {
    /// Benchmark run for the test-set analyses: a small convnet on 4000 glyphs,
    /// scored on 2000 held-out ones. The first three epochs use a low learning
    /// rate so the early checkpoints capture an unconverged model.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            train_data: GlyphConfig {
                n: 4000,
                split: Split::Train,
                seed: 1,
                ..GlyphConfig::default()
            },
            test_data: GlyphConfig {
                n: 2000,
                split: Split::Test,
                seed: 2,
                ..GlyphConfig::default()
            },
            model: ModelSpec::small_convnet([1, 28, 28], 4, 5, 64, 10),
            train: TrainConfig {
                epochs: 20,
                batch_size: 32,
                lr_schedule: vec![
                    LrStep {
                        start_epoch: 0,
                        lr: 1e-3,
                    },
                    LrStep {
                        start_epoch: 3,
                        lr: 0.05,
                    },
                ],
                checkpoint_every: 1,
                seed,
                shuffle_label_fraction: 0.0,
            },
        }
    }

    /// Shuffled-label run: 20% of 10k training labels reassigned, trained
    /// until the network has memorized them.
    pub fn memorization(seed: u64) -> Self {
        Self {
            train_data: GlyphConfig {
                n: 10_000,
                split: Split::Train,
                seed: 1,
                ..GlyphConfig::default()
            },
            test_data: GlyphConfig {
                n: 1000,
                split: Split::Test,
                seed: 2,
                ..GlyphConfig::default()
            },
            model: ModelSpec::mlp([1, 28, 28], &[256], 10),
            train: TrainConfig {
                epochs: 80,
                batch_size: 32,
                lr_schedule: vec![LrStep {
                    start_epoch: 0,
                    lr: 0.1,
                }],
                checkpoint_every: 5,
                seed,
                shuffle_label_fraction: 0.2,
            },
        }
    }

    pub fn datasets(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        Ok((make_glyphs(&self.train_data)?, make_glyphs(&self.test_data)?))
    }

    /// Generates the data and trains, writing checkpoints to `out_dir`.
    pub fn run(&self, out_dir: &Path) -> Result<GlyphRun> {
        let (train_set, test_set) = self.datasets()?;
        let checkpoints = train(&self.model, &train_set, &self.train, out_dir)?;
        Ok(GlyphRun {
            checkpoints,
            train: train_set,
            test: test_set,
        })
    }
}

#[derive(Clone, Debug)]
pub struct GlyphRun {
    pub checkpoints: CheckpointSet,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorizationReport {
    pub n_train: usize,
    pub n_shuffled: usize,
    pub n_clean: usize,
    pub shuffle_fraction: f64,
    /// Error against the labels the network was trained on.
    pub final_train_error: f64,
    pub stage: Stage,
    /// Clean examples first, shuffled second, on normalized VoG.
    pub welch: WelchResult,
    pub mean_raw_vog_clean: f64,
    pub mean_raw_vog_shuffled: f64,
}

/// Scores the training set of a shuffled-label run against its training
/// labels and tests whether shuffled and clean examples differ in mean VoG.
pub fn memorization_report(
    cs: &CheckpointSet,
    original: &LabeledDataset,
    stage: Stage,
    alpha: f64,
    workers: usize,
) -> Result<MemorizationReport> {
    let record = cs.label_shuffle()?.ok_or_else(|| {
        VogError::validation("checkpoint set was not trained with shuffled labels")
    })?;
    let trained_on = record.apply(original)?;
    let (_, final_train_error) = evaluate(&cs.final_model()?, &trained_on)?;
    let opts = VogOptions::new(LabelSource::True, stage).with_workers(workers);
    let records = compute_vog(cs, &trained_on, opts)?;
    let (shuffled, clean): (Vec<&VogRecord>, Vec<&VogRecord>) =
        records.iter().partition(|r| record.is_shuffled(r.example_id));
    let norm = |rs: &[&VogRecord]| rs.iter().map(|r| r.normalized_vog).collect::<Vec<_>>();
    let raw_mean = |rs: &[&VogRecord]| rs.iter().map(|r| r.raw_vog).sum::<f64>() / rs.len() as f64;
    let welch = welch_ttest_samples(&norm(&clean), &norm(&shuffled), alpha)?;
    Ok(MemorizationReport {
        n_train: records.len(),
        n_shuffled: shuffled.len(),
        n_clean: clean.len(),
        shuffle_fraction: record.fraction,
        final_train_error,
        stage,
        welch,
        mean_raw_vog_clean: raw_mean(&clean),
        mean_raw_vog_shuffled: raw_mean(&shuffled),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub stage: Stage,
    pub vog: OodMetrics,
    pub msp: OodMetrics,
    pub quartiles: Vec<QuartileRow>,
}

#[derive(Clone, Debug)]
pub struct OodOutcome {
    pub report: OodReport,
    pub in_records: Vec<VogRecord>,
    pub ood_records: Vec<VogRecord>,
}

/// VoG and MSP detection of `ood` against in-distribution `data`. Both sets
/// are scored with predicted labels; OoD records are normalized with the
/// in-distribution statistics of their predicted class.
pub fn ood_experiment(
    cs: &CheckpointSet,
    data: &LabeledDataset,
    ood: &LabeledDataset,
    stage: Stage,
    workers: usize,
) -> Result<OodOutcome> {
    let opts = VogOptions::new(LabelSource::Predicted, stage).with_workers(workers);
    let in_raw = score_examples(cs, data, opts)?;
    let ood_raw = score_examples(cs, ood, opts)?;
    let stats = class_stats(&in_raw);
    let in_records = normalize_with(&in_raw, &stats)?;
    let ood_records = normalize_with(&ood_raw, &stats)?;
    let vog = ood_metrics(&vog_in_scores(&in_records), &vog_in_scores(&ood_records))?;
    let model = cs.final_model()?;
    let msp = ood_metrics(&msp_scores(&model, data)?, &msp_scores(&model, ood)?)?;
    let quartiles = ood_percentile_representation(&in_records, &ood_records)?;
    Ok(OodOutcome {
        report: OodReport {
            stage,
            vog,
            msp,
            quartiles,
        },
        in_records,
        ood_records,
    })
}
