//! The `vog` command line: `train`, `vog`, `toy`, `memtest`, `ood`, `report`.
//!
//! Every command writes its outputs atomically and is byte-reproducible for
//! fixed seeds and inputs. Failures print one `error_kind: message` line on
//! stderr and exit nonzero.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    corrupt, gaussian_ood, load_blobs_csv, load_idx, make_blobs, make_glyphs, BlobConfig,
    Corruption, GlyphConfig, LabeledDataset, Split,
};
use crate::engine::{
    class_stats, compute_vog, normalize_with, rank, read_scores_csv, scores_csv, LabelSource,
    VogOptions, VogRecord,
};
use crate::error::{Result, VogError};
use crate::evaluation::{
    class_level_report, correctness_of, decile_error, ood_metrics,
    ood_percentile_representation, stage_flip_from_tables, vog_in_scores, ClassLevelReport,
    DecileErrorTable, OodMetrics, QuartileRow, StageFlipReport,
};
use crate::experiments::{
    memorization_report, ood_experiment, run_toy, GlyphExperiment, MemorizationReport, ToyConfig,
    ToyReport,
};
use crate::io::{fmt_sig12, fnv1a64, write_atomic};
use crate::nn::ModelSpec;
use crate::training::{evaluate, train, CheckpointSet, Stage, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;
pub const TRAIN_REPORT_FILE: &str = "train_report.json";

/// Where a dataset comes from. Paths are relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Glyphs {
        glyphs: GlyphConfig,
    },
    /// One half of a [`make_blobs`] draw.
    Blobs {
        blobs: BlobConfig,
        split: Split,
    },
    BlobsCsv {
        path: PathBuf,
        split: Split,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        split: Split,
    },
    GaussianOod {
        n: usize,
        image_shape: Vec<usize>,
        seed: u64,
    },
    Corrupted {
        base: Box<DatasetSource>,
        corruption: Corruption,
        seed: u64,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSource::Glyphs { glyphs } => make_glyphs(glyphs),
            DatasetSource::Blobs { blobs, split } => {
                let (train_set, test_set) = make_blobs(blobs)?;
                match split {
                    Split::Train => Ok(train_set),
                    Split::Test => Ok(test_set),
                    Split::Ood => Err(VogError::validation("blobs have no ood split")),
                }
            }
            DatasetSource::BlobsCsv { path, split } => load_blobs_csv(path, *split),
            DatasetSource::Idx {
                images,
                labels,
                split,
            } => load_idx(images, labels, *split),
            DatasetSource::GaussianOod {
                n,
                image_shape,
                seed,
            } => gaussian_ood(*n, image_shape, *seed),
            DatasetSource::Corrupted {
                base,
                corruption,
                seed,
            } => corrupt(&base.load()?, *corruption, *seed),
        }
    }

    fn resolve(&mut self, base_dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        match self {
            DatasetSource::BlobsCsv { path, .. } => fix(path),
            DatasetSource::Idx { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSource::Corrupted { base, .. } => base.resolve(base_dir),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<DatasetSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<DatasetSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood: Option<DatasetSource>,
}

impl DataSection {
    fn get(&self, split: Split) -> Result<&DatasetSource> {
        match split {
            Split::Train => self.train.as_ref(),
            Split::Test => self.test.as_ref(),
            Split::Ood => self.ood.as_ref(),
        }
        .ok_or_else(|| {
            VogError::validation(format!("config has no `data.{}` dataset", split.as_str()))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VogSection {
    #[serde(default = "default_stage")]
    pub stage: Stage,
    #[serde(default = "default_label_source")]
    pub label_source: LabelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_stage() -> Stage {
    Stage::Late
}

fn default_label_source() -> LabelSource {
    LabelSource::Predicted
}

impl Default for VogSection {
    fn default() -> Self {
        Self {
            stage: default_stage(),
            label_source: default_label_source(),
            workers: None,
        }
    }
}

/// A single JSON config shared by all commands; each reads the sections it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub vog: VogSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| VogError::Format {
            field: "config",
            message: e.to_string(),
        })?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(VogError::Format {
                field: "config_version",
                message: format!(
                    "found {}, this build reads {CONFIG_VERSION}",
                    cfg.config_version
                ),
            });
        }
        Ok(cfg)
    }

    /// Parses `path` and resolves dataset paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VogError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for src in [&mut cfg.data.train, &mut cfg.data.test, &mut cfg.data.ood]
            .into_iter()
            .flatten()
        {
            src.resolve(base);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// 16 hex digits of FNV-1a over the compact JSON form.
    pub fn digest(&self) -> String {
        digest_of(self)
    }

    pub fn glyph(exp: &GlyphExperiment) -> Self {
        let shape = exp.model.input_shape.to_vec();
        Self {
            config_version: CONFIG_VERSION,
            model: Some(exp.model.clone()),
            train: Some(exp.train.clone()),
            vog: VogSection::default(),
            data: DataSection {
                train: Some(DatasetSource::Glyphs {
                    glyphs: exp.train_data.clone(),
                }),
                test: Some(DatasetSource::Glyphs {
                    glyphs: exp.test_data.clone(),
                }),
                ood: Some(DatasetSource::GaussianOod {
                    n: 10_000,
                    image_shape: shape,
                    seed: 0,
                }),
            },
            toy: None,
        }
    }

    pub fn toy(toy: ToyConfig) -> Self {
        Self {
            config_version: CONFIG_VERSION,
            model: Some(ModelSpec::mlp([1, 1, 2], &[toy.hidden], 2)),
            train: Some(toy.train.clone()),
            vog: VogSection {
                stage: toy.stage,
                label_source: toy.label_source,
                workers: None,
            },
            data: DataSection {
                train: Some(DatasetSource::Blobs {
                    blobs: toy.blobs.clone(),
                    split: Split::Train,
                }),
                test: Some(DatasetSource::Blobs {
                    blobs: toy.blobs.clone(),
                    split: Split::Test,
                }),
                ood: None,
            },
            toy: Some(toy),
        }
    }

    pub fn preset(preset: Preset, seed: u64) -> Self {
        match preset {
            Preset::Benchmark => Self::glyph(&GlyphExperiment::benchmark(seed)),
            Preset::Memorization => Self::glyph(&GlyphExperiment::memorization(seed)),
            Preset::Toy => Self::toy(ToyConfig::new(seed)),
        }
    }

    fn require_model(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| VogError::validation("config has no `model` section"))
    }

    fn require_train(&self) -> Result<&TrainConfig> {
        self.train
            .as_ref()
            .ok_or_else(|| VogError::validation("config has no `train` section"))
    }
}

fn digest_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("value serializes");
    format!("{:016x}", fnv1a64(json.as_bytes()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Convnet on 4000 glyphs with a low-learning-rate warm-up
    Benchmark,
    /// MLP on 10k glyphs with 20% shuffled labels
    Memorization,
    /// Two-cluster toy problem
    Toy,
}

/// Provenance fields placed at the top of every JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool_version: String,
    pub config_digest: String,
    pub seed: Option<u64>,
}

impl Header {
    pub fn new(config_digest: String, seed: Option<u64>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest,
            seed,
        }
    }
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    #[serde(flatten)]
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(path: &Path, header: &Header, body: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Output { header, body })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Parser, Debug)]
#[command(name = "vog", version, about = "Rank examples by Variance of Gradients over training checkpoints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and store checkpoints
    Train(TrainArgs),
    /// Score a dataset with VoG from a checkpoint directory
    Vog(VogArgs),
    /// Two-cluster toy study: VoG against distance to the decision boundary
    Toy(ToyArgs),
    /// Shuffled-label memorization test
    Memtest(MemtestArgs),
    /// Out-of-distribution detection with VoG and max softmax probability
    Ood(OodArgs),
    /// Decile error table, stage flip and extreme examples from score CSVs
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct WorkerArgs {
    /// Threads for VoG scoring; output does not depend on it [default: available parallelism]
    #[arg(long, env = "VOG_WORKERS")]
    pub workers: Option<usize>,
}

impl WorkerArgs {
    fn resolve(&self, cfg: Option<&VogSection>) -> usize {
        self.workers
            .or(cfg.and_then(|v| v.workers))
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON run config with `model`, `train` and `data.train` [default: none, use --preset]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in config used when --config is absent
    #[arg(long, value_enum, default_value = "benchmark")]
    pub preset: Preset,
    /// Overrides the training seed [default: from the config, 0 for presets]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint directory to create (required)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct VogArgs {
    /// Checkpoint directory holding manifest.json (required)
    #[arg(long)]
    pub checkpoints: PathBuf,
    /// Run config naming the datasets [default: the one recorded by `train` in the checkpoint directory]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset from the config: train, test or ood
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// early, late or all [default: vog.stage from the config, else late]
    #[arg(long)]
    pub stage: Option<Stage>,
    /// true or predicted [default: vog.label_source from the config, else predicted]
    #[arg(long)]
    pub label_source: Option<LabelSource>,
    #[command(flatten)]
    pub workers: WorkerArgs,
    /// Score CSV to write (required)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    /// Seeds both the data and the training run
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run config with a `toy` section, replacing the built-in one and --seed [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub workers: WorkerArgs,
    /// Output directory for the report, points CSV and checkpoints (required)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct MemtestArgs {
    /// Run config with `model`, `train` and `data.train` [default: the memorization preset]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the training seed [default: from the config, 0 for the preset]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of training labels reassigned before training
    #[arg(long, default_value_t = 0.2)]
    pub shuffle_fraction: f64,
    /// Checkpoint window: early, late or all
    #[arg(long, default_value = "late")]
    pub stage: Stage,
    /// Significance level of the Welch test
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub workers: WorkerArgs,
    /// Output directory for the report and checkpoints (required)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct OodArgs {
    /// Checkpoint directory; scores `data.test` against `data.ood` and adds MSP [default: none]
    #[arg(long, conflicts_with_all = ["in_scores", "ood_scores"])]
    pub checkpoints: Option<PathBuf>,
    /// Run config naming the datasets [default: the one recorded by `train`]
    #[arg(long, requires = "checkpoints")]
    pub config: Option<PathBuf>,
    /// Score CSV of in-distribution examples, VoG only without MSP [default: none]
    #[arg(long, requires = "ood_scores")]
    pub in_scores: Option<PathBuf>,
    /// Score CSV of out-of-distribution examples [default: none]
    #[arg(long, requires = "in_scores")]
    pub ood_scores: Option<PathBuf>,
    /// Used with --checkpoints when the config has no `data.ood`: Gaussian noise images
    #[arg(long, default_value_t = 10_000)]
    pub ood_n: usize,
    /// Seed of the Gaussian noise images
    #[arg(long, default_value_t = 0)]
    pub ood_seed: u64,
    /// early, late or all [default: vog.stage from the config, else late]
    #[arg(long)]
    pub stage: Option<Stage>,
    #[command(flatten)]
    pub workers: WorkerArgs,
    /// Report JSON to write (required)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Score CSV, normally late stage (required)
    #[arg(long)]
    pub scores: PathBuf,
    /// Early-stage score CSV of the same examples; enables the stage flip report [default: none]
    #[arg(long)]
    pub early_scores: Option<PathBuf>,
    /// CSV `example_id,correct` (0/1) [default: true vs predicted label in the scores]
    #[arg(long)]
    pub correctness: Option<PathBuf>,
    /// Examples listed per class at each end of the ranking
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Output directory for report.json, deciles.csv and extremes.csv (required)
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("usage_error: {first}");
            return 2;
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}: {}", e.kind(), e.to_string().replace('\n', " "));
            1
        }
    }
}

/// Runs one command, returning a one-line summary for stdout.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Train(a) => cmd_train(&a),
        Command::Vog(a) => cmd_vog(&a),
        Command::Toy(a) => cmd_toy(&a),
        Command::Memtest(a) => cmd_memtest(&a),
        Command::Ood(a) => cmd_ood(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

#[derive(Serialize, Deserialize)]
struct TrainReport {
    config: RunConfig,
    checkpoint_epochs: Vec<usize>,
    final_train_loss: f64,
    final_train_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_test_error: Option<f64>,
}

fn train_config_with_seed(cfg: &RunConfig, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        let t = cfg
            .train
            .as_mut()
            .ok_or_else(|| VogError::validation("config has no `train` section"))?;
        t.seed = s;
    }
    Ok(cfg)
}

fn load_or_preset(path: Option<&Path>, preset: Preset, seed: Option<u64>) -> Result<RunConfig> {
    match path {
        Some(p) => train_config_with_seed(&RunConfig::load(p)?, seed),
        None => Ok(RunConfig::preset(preset, seed.unwrap_or(0))),
    }
}

fn train_into(cfg: &RunConfig, out_dir: &Path) -> Result<(CheckpointSet, LabeledDataset)> {
    let spec = cfg.require_model()?;
    let tc = cfg.require_train()?;
    let data = cfg.data.get(Split::Train)?.load()?;
    let cs = train(spec, &data, tc, out_dir)?;
    let model = cs.final_model()?;
    let (final_train_loss, final_train_error) = evaluate(&model, &data)?;
    let final_test_error = match &cfg.data.test {
        Some(src) => Some(evaluate(&model, &src.load()?)?.1),
        None => None,
    };
    let report = TrainReport {
        config: cfg.clone(),
        checkpoint_epochs: cs.epochs(),
        final_train_loss,
        final_train_error,
        final_test_error,
    };
    write_json(
        &out_dir.join(TRAIN_REPORT_FILE),
        &Header::new(cfg.digest(), Some(tc.seed)),
        &report,
    )?;
    Ok((cs, data))
}

fn cmd_train(a: &TrainArgs) -> Result<String> {
    let cfg = load_or_preset(a.config.as_deref(), a.preset, a.seed)?;
    let (cs, _) = train_into(&cfg, &a.out_dir)?;
    Ok(cs.dir().join(crate::training::MANIFEST_FILE).display().to_string())
}

/// The config passed explicitly, or the one `train` recorded next to the checkpoints.
fn config_for_checkpoints(config: Option<&Path>, checkpoints: &Path) -> Result<RunConfig> {
    if let Some(p) = config {
        return RunConfig::load(p);
    }
    let path = checkpoints.join(TRAIN_REPORT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| VogError::io(&path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = value
        .get_mut("config")
        .map(serde_json::Value::take)
        .ok_or_else(|| VogError::Format {
            field: "config",
            message: format!("{} has no recorded config", path.display()),
        })?;
    Ok(serde_json::from_value(cfg)?)
}

fn cmd_vog(a: &VogArgs) -> Result<String> {
    let cs = CheckpointSet::open(&a.checkpoints)?;
    let cfg = config_for_checkpoints(a.config.as_deref(), &a.checkpoints)?;
    let data = cfg.data.get(a.split)?.load()?;
    let opts = VogOptions::new(
        a.label_source.unwrap_or(cfg.vog.label_source),
        a.stage.unwrap_or(cfg.vog.stage),
    )
    .with_workers(a.workers.resolve(Some(&cfg.vog)));
    let records = compute_vog(&cs, &data, opts)?;
    write_atomic(&a.out, scores_csv(&records).as_bytes())?;
    Ok(format!("{} ({} examples)", a.out.display(), records.len()))
}

fn toy_points_csv(outcome: &crate::experiments::ToyOutcome) -> String {
    let mut out = String::from("example_id,x,y,true_label,predicted_label,raw_vog,normalized_vog,boundary_distance\n");
    for ((ex, r), d) in outcome.test.examples.iter().zip(&outcome.records).zip(&outcome.distances) {
        let p = ex.image.data();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            ex.id,
            fmt_sig12(p[0]),
            fmt_sig12(p[1]),
            r.true_label,
            r.predicted_label,
            fmt_sig12(r.raw_vog),
            fmt_sig12(r.normalized_vog),
            fmt_sig12(*d)
        ));
    }
    out
}

fn cmd_toy(a: &ToyArgs) -> Result<String> {
    let (toy, cfg) = match &a.config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            let toy = cfg
                .toy
                .clone()
                .ok_or_else(|| VogError::validation("config has no `toy` section"))?;
            (toy, cfg)
        }
        None => {
            let toy = ToyConfig::new(a.seed);
            (toy.clone(), RunConfig::toy(toy))
        }
    };
    let workers = a.workers.resolve(Some(&cfg.vog));
    let outcome = run_toy(&toy, &a.out_dir.join("checkpoints"), workers)?;
    let header = Header::new(digest_of(&toy), Some(toy.train.seed));
    write_json(&a.out_dir.join("toy_report.json"), &header, &outcome.report)?;
    write_atomic(&a.out_dir.join("toy_points.csv"), toy_points_csv(&outcome).as_bytes())?;
    Ok(toy_summary(&outcome.report))
}

fn toy_summary(r: &ToyReport) -> String {
    match &r.correlation {
        Some(c) => format!(
            "test error {:.4}, spearman(VoG, boundary distance) {:.4} (p {:.3e})",
            r.test_error, c.spearman_rho, c.spearman_p
        ),
        None => format!(
            "test error {:.4}, correlation undefined: {}",
            r.test_error,
            r.undefined_reason.as_deref().unwrap_or("unknown")
        ),
    }
}

fn cmd_memtest(a: &MemtestArgs) -> Result<String> {
    let mut cfg = load_or_preset(a.config.as_deref(), Preset::Memorization, a.seed)?;
    let tc = cfg
        .train
        .as_mut()
        .ok_or_else(|| VogError::validation("config has no `train` section"))?;
    tc.shuffle_label_fraction = a.shuffle_fraction;
    if a.shuffle_fraction <= 0.0 {
        return Err(VogError::validation("memtest needs --shuffle-fraction > 0"));
    }
    let ckpt_dir = a.out_dir.join("checkpoints");
    let (cs, original) = train_into(&cfg, &ckpt_dir)?;
    let workers = a.workers.resolve(Some(&cfg.vog));
    let report: MemorizationReport = memorization_report(&cs, &original, a.stage, a.alpha, workers)?;
    let header = Header::new(
        digest_of(&(&cfg, a.stage, a.alpha)),
        cfg.train.as_ref().map(|t| t.seed),
    );
    write_json(&a.out_dir.join("memtest_report.json"), &header, &report)?;
    Ok(format!(
        "shuffled mean {:.4} vs clean mean {:.4}, t {:.3}, p {:.3e}, reject {}",
        report.welch.mean2,
        report.welch.mean1,
        report.welch.t_statistic,
        report.welch.p_value,
        report.welch.reject_at_alpha
    ))
}

#[derive(Serialize)]
struct OodOutput {
    stage: Stage,
    n_in: usize,
    n_ood: usize,
    vog: OodMetrics,
    msp: Option<OodMetrics>,
    quartiles: Vec<QuartileRow>,
}

fn cmd_ood(a: &OodArgs) -> Result<String> {
    let (header, out) = match (&a.checkpoints, &a.in_scores, &a.ood_scores) {
        (Some(dir), _, _) => {
            let cs = CheckpointSet::open(dir)?;
            let cfg = config_for_checkpoints(a.config.as_deref(), dir)?;
            let data = cfg.data.get(Split::Test)?.load()?;
            let ood_src = cfg.data.ood.clone().unwrap_or(DatasetSource::GaussianOod {
                n: a.ood_n,
                image_shape: data.image_shape().to_vec(),
                seed: a.ood_seed,
            });
            let ood = ood_src.load()?;
            let stage = a.stage.unwrap_or(cfg.vog.stage);
            let o = ood_experiment(&cs, &data, &ood, stage, a.workers.resolve(Some(&cfg.vog)))?;
            let header = Header::new(
                digest_of(&(&cfg, &ood_src, stage)),
                cs.manifest().train_config.seed.into(),
            );
            let out = OodOutput {
                stage,
                n_in: data.len(),
                n_ood: ood.len(),
                vog: o.report.vog,
                msp: Some(o.report.msp),
                quartiles: o.report.quartiles,
            };
            (header, out)
        }
        (None, Some(in_path), Some(ood_path)) => {
            let in_raw = read_scores_csv(in_path)?;
            let ood_raw = read_scores_csv(ood_path)?;
            let stage = in_raw
                .first()
                .map(|r| r.stage)
                .ok_or_else(|| VogError::validation("in-distribution score CSV is empty"))?;
            if in_raw.iter().chain(&ood_raw).any(|r| r.stage != stage) {
                return Err(VogError::validation("score CSVs mix stages"));
            }
            // Re-normalize both sets with the in-distribution class statistics.
            let stats = class_stats(&in_raw);
            let in_records = normalize_with(&in_raw, &stats)?;
            let ood_records = normalize_with(&ood_raw, &stats)?;
            let inputs = (
                fnv1a64(&std::fs::read(in_path).map_err(|e| VogError::io(in_path, e))?),
                fnv1a64(&std::fs::read(ood_path).map_err(|e| VogError::io(ood_path, e))?),
            );
            let out = OodOutput {
                stage,
                n_in: in_records.len(),
                n_ood: ood_records.len(),
                vog: ood_metrics(&vog_in_scores(&in_records), &vog_in_scores(&ood_records))?,
                msp: None,
                quartiles: ood_percentile_representation(&in_records, &ood_records)?,
            };
            (Header::new(digest_of(&inputs), None), out)
        }
        _ => {
            return Err(VogError::validation(
                "ood needs --checkpoints, or both --in-scores and --ood-scores",
            ))
        }
    };
    write_json(&a.out, &header, &out)?;
    Ok(format!(
        "VoG AUROC {:.4}{}",
        out.vog.auroc,
        out.msp
            .map(|m| format!(", MSP AUROC {:.4}", m.auroc))
            .unwrap_or_default()
    ))
}

fn read_correctness(path: &Path) -> Result<HashMap<usize, bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| VogError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("example_id,correct") {
        return Err(VogError::Format {
            field: "header",
            message: format!("{} must start with `example_id,correct`", path.display()),
        });
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let bad = || VogError::Format {
                field: "correct",
                message: format!("{}: bad row `{l}`", path.display()),
            };
            let (id, c) = l.split_once(',').ok_or_else(bad)?;
            let id: usize = id.trim().parse().map_err(|_| bad())?;
            let c = match c.trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return Err(bad()),
            };
            Ok((id, c))
        })
        .collect()
}

#[derive(Serialize)]
struct ClassExtremes {
    class: usize,
    n: usize,
    /// Lowest normalized VoG first.
    lowest: Vec<usize>,
    /// Highest normalized VoG first.
    highest: Vec<usize>,
}

fn class_extremes(records: &[VogRecord], k: usize) -> Vec<ClassExtremes> {
    let ranking = rank(records);
    let mut by_class: BTreeMap<usize, Vec<&VogRecord>> = BTreeMap::new();
    for r in ranking.records() {
        by_class.entry(r.group_label()).or_default().push(r);
    }
    by_class
        .into_iter()
        .map(|(class, rs)| ClassExtremes {
            class,
            n: rs.len(),
            lowest: rs.iter().take(k).map(|r| r.example_id).collect(),
            highest: rs.iter().rev().take(k).map(|r| r.example_id).collect(),
        })
        .collect()
}

#[derive(Serialize)]
struct ReportOutput {
    deciles: DecileErrorTable,
    spearman_decile_error: Option<f64>,
    spearman_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage_flip: Option<StageFlipReport>,
    class_level: ClassLevelReport,
    extremes: Vec<ClassExtremes>,
}

fn cmd_report(a: &ReportArgs) -> Result<String> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| VogError::io(p, e));
    let records = read_scores_csv(&a.scores)?;
    let correctness = match &a.correctness {
        Some(p) => read_correctness(p)?,
        None => correctness_of(&records),
    };
    let deciles = decile_error(&rank(&records), &correctness)?;
    let stage_flip = match &a.early_scores {
        Some(p) => {
            let early = read_scores_csv(p)?;
            let early_table = decile_error(&rank(&early), &correctness)?;
            Some(stage_flip_from_tables(early_table, deciles.clone()))
        }
        None => None,
    };
    let trend = deciles.trend();
    let out = ReportOutput {
        spearman_decile_error: trend.map(|t| t.0),
        spearman_p: trend.map(|t| t.1),
        deciles: deciles.clone(),
        stage_flip,
        class_level: class_level_report(&records),
        extremes: class_extremes(&records, a.top_k),
    };

    let inputs = (
        fnv1a64(&read(&a.scores)?),
        a.early_scores.as_deref().map(read).transpose()?.map(|b| fnv1a64(&b)),
        a.correctness.as_deref().map(read).transpose()?.map(|b| fnv1a64(&b)),
        a.top_k,
    );
    let header = Header::new(digest_of(&inputs), None);
    write_atomic(&a.out_dir.join("deciles.csv"), deciles.to_csv().as_bytes())?;
    let mut ext = String::from("class,end,position,example_id\n");
    for c in &out.extremes {
        for (end, ids) in [("lowest", &c.lowest), ("highest", &c.highest)] {
            for (i, id) in ids.iter().enumerate() {
                ext.push_str(&format!("{},{end},{},{id}\n", c.class, i + 1));
            }
        }
    }
    write_atomic(&a.out_dir.join("extremes.csv"), ext.as_bytes())?;
    write_json(&a.out_dir.join("report.json"), &header, &out)?;
    Ok(match (out.spearman_decile_error, &out.stage_flip) {
        (Some(rho), Some(f)) => format!("decile/error spearman {rho:.4}, stage flip {}", f.flip_detected),
        (Some(rho), None) => format!("decile/error spearman {rho:.4}"),
        (None, _) => "decile errors are constant".to_string(),
    })
}
