//! Variance of Gradients.
//!
//! For an example `x` and class index `p`, the gradient matrix `S` is
//! `dA_p^l/dx` averaged over colour channels. Over the `K` checkpoints of a
//! stage, each pixel's population standard deviation (divisor `K`) is taken,
//! and the raw VoG score is the mean of those over all pixels. Raw scores are
//! then z-scored within each class.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Split, OOD_LABEL};
use crate::error::{Result, VogError};
use crate::io::{fmt_sig12, write_atomic};
use crate::nn::{argmax, Model};
use crate::tensor::Tensor;
use crate::training::{CheckpointSet, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    True,
    Predicted,
}

impl LabelSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelSource::True => "true",
            LabelSource::Predicted => "predicted",
        }
    }
}

impl std::str::FromStr for LabelSource {
    type Err = VogError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(LabelSource::True),
            "predicted" => Ok(LabelSource::Predicted),
            other => Err(VogError::validation(format!(
                "unknown label source `{other}` (expected true or predicted)"
            ))),
        }
    }
}

/// Channel-averaged input gradient of one example at one checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix {
    pub example_id: usize,
    pub epoch: usize,
    /// `height x width`
    pub values: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VogRecord {
    pub example_id: usize,
    pub split: Split,
    pub true_label: usize,
    pub predicted_label: usize,
    pub raw_vog: f64,
    pub normalized_vog: f64,
    pub label_source: LabelSource,
    pub stage: Stage,
}

impl VogRecord {
    /// The class used both as gradient index and as normalization group.
    pub fn group_label(&self) -> usize {
        match self.label_source {
            LabelSource::True => self.true_label,
            LabelSource::Predicted => self.predicted_label,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }
}

/// Averages a `C x H x W` gradient over channels.
pub fn channel_mean(grad: &Tensor) -> Result<Tensor> {
    let shape = grad.shape();
    if shape.len() != 3 {
        return Err(VogError::Shape {
            context: "gradient channel average (C x H x W)",
            expected: vec![0, 0, 0],
            got: shape.to_vec(),
        });
    }
    let (c, plane) = (shape[0], shape[1] * shape[2]);
    let d = grad.data();
    let mut out = vec![0.0; plane];
    for ch in 0..c {
        for (o, &v) in out.iter_mut().zip(&d[ch * plane..(ch + 1) * plane]) {
            *o += v;
        }
    }
    if c > 1 {
        for o in &mut out {
            *o /= c as f64;
        }
    }
    Tensor::new(vec![shape[1], shape[2]], out)
}

pub fn gradient_matrix(
    model: &Model,
    x: &Tensor,
    p: usize,
    example_id: usize,
    epoch: usize,
) -> Result<GradientMatrix> {
    let grad = model.input_gradient(x, p)?;
    Ok(GradientMatrix {
        example_id,
        epoch,
        values: channel_mean(&grad)?,
    })
}

/// Streaming per-pixel mean and sum of squared deviations (Welford).
#[derive(Clone, Debug)]
pub struct VogAccumulator {
    shape: Vec<usize>,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VogAccumulator {
    pub fn new(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    pub fn push(&mut self, s: &Tensor) -> Result<()> {
        if s.shape() != self.shape {
            return Err(VogError::validation(format!(
                "gradient matrix shape {:?} differs from {:?}",
                s.shape(),
                self.shape
            )));
        }
        self.count += 1;
        let k = self.count as f64;
        for ((m, q), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(s.data()) {
            let delta = x - *m;
            *m += delta / k;
            *q += delta * (x - *m);
        }
        Ok(())
    }

    /// Mean over pixels of `sqrt(M2 / K)`.
    pub fn score(&self) -> Result<f64> {
        if self.count < 2 {
            return Err(VogError::validation(format!(
                "VoG needs K >= 2 checkpoints, got {}",
                self.count
            )));
        }
        let k = self.count as f64;
        let total: f64 = self.m2.iter().map(|&q| (q.max(0.0) / k).sqrt()).sum();
        Ok(total / self.m2.len() as f64)
    }
}

/// Raw VoG of one example from its `K >= 2` gradient matrices.
pub fn vog_score(mats: &[GradientMatrix]) -> Result<f64> {
    let first = mats.first().ok_or_else(|| {
        VogError::validation("VoG needs K >= 2 checkpoints, got 0")
    })?;
    if let Some(other) = mats.iter().find(|m| m.example_id != first.example_id) {
        return Err(VogError::validation(format!(
            "gradient matrices mix examples {} and {}",
            first.example_id, other.example_id
        )));
    }
    let mut acc = VogAccumulator::new(first.values.shape());
    for m in mats {
        acc.push(&m.values)?;
    }
    acc.score()
}

/// Population mean and standard deviation of raw VoG within one class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl ClassStats {
    fn z(&self, raw: f64) -> f64 {
        if self.count < 2 || self.std == 0.0 || !self.std.is_finite() {
            0.0
        } else {
            (raw - self.mean) / self.std
        }
    }
}

/// Per-class statistics keyed by each record's grouping label.
pub fn class_stats(records: &[VogRecord]) -> BTreeMap<usize, ClassStats> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group_label()).or_default().push(r.raw_vog);
    }
    groups
        .into_iter()
        .map(|(label, vals)| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (
                label,
                ClassStats {
                    count: vals.len(),
                    mean,
                    std: var.sqrt(),
                },
            )
        })
        .collect()
}

/// Z-scores raw VoG within each class. Classes with one member or zero spread
/// get 0.
pub fn normalize_by_class(records: &[VogRecord]) -> Result<Vec<VogRecord>> {
    if records.is_empty() {
        return Err(VogError::validation("cannot normalize an empty record list"));
    }
    let stats = class_stats(records);
    normalize_with(records, &stats)
}

/// Z-scores against externally supplied class statistics, e.g. OoD records
/// against the in-distribution statistics of their predicted class. Records
/// whose class has no statistics get 0.
pub fn normalize_with(
    records: &[VogRecord],
    stats: &BTreeMap<usize, ClassStats>,
) -> Result<Vec<VogRecord>> {
    records
        .iter()
        .map(|r| {
            let normalized = stats.get(&r.group_label()).map_or(0.0, |s| s.z(r.raw_vog));
            if !normalized.is_finite() {
                return Err(VogError::validation(format!(
                    "non-finite normalized VoG for example {}",
                    r.example_id
                )));
            }
            Ok(VogRecord {
                normalized_vog: normalized,
                ..r.clone()
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VogOptions {
    pub label_source: LabelSource,
    pub stage: Stage,
    pub workers: usize,
}

impl VogOptions {
    pub fn new(label_source: LabelSource, stage: Stage) -> Self {
        Self {
            label_source,
            stage,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Raw VoG for every example (normalized score left at 0).
///
/// The gradient index `p` is fixed per example across the stage: the true
/// label, or the prediction of the final checkpoint of the full run.
pub fn score_examples(
    cs: &CheckpointSet,
    data: &LabeledDataset,
    opts: VogOptions,
) -> Result<Vec<VogRecord>> {
    data.validate()?;
    if opts.label_source == LabelSource::True && data.split == Split::Ood {
        return Err(VogError::validation(
            "out-of-distribution data has no true labels; use the predicted label source",
        ));
    }
    let stage_set = cs.select_stage(opts.stage)?;
    let final_model = cs.final_model()?;
    let models = stage_set
        .entries()
        .iter()
        .map(|e| stage_set.load_model(e))
        .collect::<Result<Vec<_>>>()?;
    let epochs = stage_set.epochs();

    let score_one = |idx: usize| -> Result<VogRecord> {
        let e = &data.examples[idx];
        let logits = final_model.forward(&e.image)?;
        let predicted = argmax(logits.data());
        let p = match opts.label_source {
            LabelSource::True => e.label,
            LabelSource::Predicted => predicted,
        };
        let mut acc: Option<VogAccumulator> = None;
        for (model, &epoch) in models.iter().zip(&epochs) {
            let s = gradient_matrix(model, &e.image, p, e.id, epoch)?;
            acc.get_or_insert_with(|| VogAccumulator::new(s.values.shape()))
                .push(&s.values)?;
        }
        let raw_vog = acc.expect("stage has checkpoints").score()?;
        Ok(VogRecord {
            example_id: e.id,
            split: data.split,
            true_label: e.label,
            predicted_label: predicted,
            raw_vog,
            normalized_vog: 0.0,
            label_source: opts.label_source,
            stage: opts.stage,
        })
    };

    let n = data.len();
    let workers = opts.workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(score_one).collect();
    }
    let chunk = n.div_ceil(workers);
    let parts: Vec<Result<Vec<VogRecord>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let range = (w * chunk).min(n)..((w + 1) * chunk).min(n);
                let f = &score_one;
                scope.spawn(move || range.map(f).collect::<Result<Vec<_>>>())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("VoG worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(n);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Scores every example and normalizes within classes of the chosen label source.
pub fn compute_vog(
    cs: &CheckpointSet,
    data: &LabeledDataset,
    opts: VogOptions,
) -> Result<Vec<VogRecord>> {
    let raw = score_examples(cs, data, opts)?;
    normalize_by_class(&raw)
}

/// Records in ascending order of normalized VoG.
#[derive(Clone, Debug, PartialEq)]
pub struct VogRanking {
    records: Vec<VogRecord>,
}

fn split_order(s: Split) -> u8 {
    match s {
        Split::Train => 0,
        Split::Test => 1,
        Split::Ood => 2,
    }
}

/// Sorts by normalized VoG, breaking ties by example id (then split, when
/// records from several splits are pooled).
pub fn rank(records: &[VogRecord]) -> VogRanking {
    let mut records = records.to_vec();
    records.sort_by(|a, b| {
        a.normalized_vog
            .total_cmp(&b.normalized_vog)
            .then(a.example_id.cmp(&b.example_id))
            .then(split_order(a.split).cmp(&split_order(b.split)))
    });
    VogRanking { records }
}

impl VogRanking {
    pub fn records(&self) -> &[VogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rank slices of the contiguous equal-size buckets.
    pub fn buckets(&self, count: usize) -> Vec<&[VogRecord]> {
        percentile_buckets(self.records.len(), count)
            .into_iter()
            .map(|r| &self.records[r])
            .collect()
    }
}

/// Splits `n` ranks into `count` contiguous buckets whose sizes differ by at
/// most one; the larger buckets come first (lowest scores).
pub fn percentile_buckets(n: usize, count: usize) -> Vec<Range<usize>> {
    let count = count.max(1);
    let (base, extra) = (n / count, n % count);
    let mut start = 0;
    (0..count)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub const SCORES_HEADER: &str =
    "example_id,split,true_label,predicted_label,raw_vog,normalized_vog,stage,label_source";

fn label_field(label: usize) -> String {
    if label == OOD_LABEL {
        "-1".to_string()
    } else {
        label.to_string()
    }
}

/// Score CSV text, rows ordered by (split, example_id).
pub fn scores_csv(records: &[VogRecord]) -> String {
    let mut rows: Vec<&VogRecord> = records.iter().collect();
    rows.sort_by_key(|r| (split_order(r.split), r.example_id));
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.example_id,
            r.split.as_str(),
            label_field(r.true_label),
            label_field(r.predicted_label),
            fmt_sig12(r.raw_vog),
            fmt_sig12(r.normalized_vog),
            r.stage.as_str(),
            r.label_source.as_str()
        ));
    }
    out
}

pub fn write_scores_csv(path: &Path, records: &[VogRecord]) -> Result<()> {
    write_atomic(path, scores_csv(records).as_bytes())
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<VogRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| VogError::io(path, e))?;
    parse_scores_csv(&text)
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<VogRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(SCORES_HEADER) {
        return Err(VogError::Format {
            field: "header",
            message: format!("score CSV must start with `{SCORES_HEADER}`"),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let c: Vec<&str> = line.split(',').collect();
            let bad = |field: &'static str| VogError::Format {
                field,
                message: format!("row {}: `{line}`", i + 1),
            };
            if c.len() != 8 {
                return Err(bad("row"));
            }
            let label = |s: &str, f| -> Result<usize> {
                if s == "-1" {
                    Ok(OOD_LABEL)
                } else {
                    s.parse().map_err(|_| bad(f))
                }
            };
            Ok(VogRecord {
                example_id: c[0].parse().map_err(|_| bad("example_id"))?,
                split: c[1].parse()?,
                true_label: label(c[2], "true_label")?,
                predicted_label: label(c[3], "predicted_label")?,
                raw_vog: c[4].parse().map_err(|_| bad("raw_vog"))?,
                normalized_vog: c[5].parse().map_err(|_| bad("normalized_vog"))?,
                stage: c[6].parse()?,
                label_source: c[7].parse()?,
            })
        })
        .collect()
}
