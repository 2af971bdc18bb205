//! Out-of-distribution detection metrics.
//!
//! Scores passed here are "in-distribution-ness" scores: higher means more
//! likely in-distribution. For VoG that is the negated normalized score, for
//! MSP the probability itself.

use serde::{Deserialize, Serialize};

use super::stats::ranks;
use crate::data::LabeledDataset;
use crate::engine::{percentile_buckets, rank, VogRecord};
use crate::error::{Result, VogError};
use crate::nn::{softmax, Model};

fn check_nonempty(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(VogError::validation(
            "both positive and negative score lists must be nonempty",
        ));
    }
    if pos.iter().chain(neg).any(|v| v.is_nan()) {
        return Err(VogError::validation("scores must not be NaN"));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from the Mann-Whitney rank sum.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_nonempty(pos, neg)?;
    let pooled: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let r = ranks(&pooled);
    // mid-ranks are multiples of 1/2, so doubled they are exact integers
    let twice_rank_sum: u64 = r[..pos.len()].iter().map(|&x| (2.0 * x) as u64).sum();
    let (np, nn) = (pos.len() as u64, neg.len() as u64);
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok((twice_u as f64 / 2.0) / (np * nn) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositiveClass {
    In,
    Out,
}

/// Area under the precision-recall step curve, summed over distinct
/// thresholds without interpolation. In `Out` mode the scores are negated and
/// the negatives become the positive class.
pub fn aupr(pos: &[f64], neg: &[f64], positive: PositiveClass) -> Result<f64> {
    check_nonempty(pos, neg)?;
    let (p, n): (Vec<f64>, Vec<f64>) = match positive {
        PositiveClass::In => (pos.to_vec(), neg.to_vec()),
        PositiveClass::Out => (
            neg.iter().map(|v| -v).collect(),
            pos.iter().map(|v| -v).collect(),
        ),
    };
    let mut scored: Vec<(f64, bool)> = p
        .iter()
        .map(|&s| (s, true))
        .chain(n.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total_pos = p.len() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodMetrics {
    pub auroc: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
    /// Fraction of in-distribution examples (AUPR-In baseline).
    pub base_rate_in: f64,
    /// Fraction of OoD examples (AUPR-Out baseline).
    pub base_rate_out: f64,
    pub n_in: usize,
    pub n_out: usize,
}

/// In-distribution examples are the positive class for AUROC and AUPR-In.
pub fn ood_metrics(in_scores: &[f64], out_scores: &[f64]) -> Result<OodMetrics> {
    let total = (in_scores.len() + out_scores.len()) as f64;
    Ok(OodMetrics {
        auroc: auroc(in_scores, out_scores)?,
        aupr_in: aupr(in_scores, out_scores, PositiveClass::In)?,
        aupr_out: aupr(in_scores, out_scores, PositiveClass::Out)?,
        base_rate_in: in_scores.len() as f64 / total,
        base_rate_out: out_scores.len() as f64 / total,
        n_in: in_scores.len(),
        n_out: out_scores.len(),
    })
}

/// In-distribution-ness score for VoG: low normalized VoG means typical.
pub fn vog_in_scores(records: &[VogRecord]) -> Vec<f64> {
    records.iter().map(|r| -r.normalized_vog).collect()
}

/// Maximum softmax probability per example, in example-id order.
pub fn msp_scores(model: &Model, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.examples
        .iter()
        .map(|e| Ok(msp_from_logits(model.forward(&e.image)?.data())))
        .collect()
}

pub fn msp_from_logits(logits: &[f64]) -> f64 {
    softmax(logits).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuartileRow {
    /// 1 = lowest VoG quarter.
    pub quartile: usize,
    pub n_total: usize,
    pub n_ood: usize,
    /// Share of this quartile that is OoD.
    pub ood_share_of_quartile: f64,
    /// Share of all OoD examples that fall in this quartile.
    pub fraction_of_ood: f64,
}

/// Pools both record sets into one ranking and counts OoD examples per
/// quartile. Both sets must already carry normalized scores from one
/// normalization (see [`crate::engine::normalize_with`]).
pub fn ood_percentile_representation(
    in_records: &[VogRecord],
    ood_records: &[VogRecord],
) -> Result<Vec<QuartileRow>> {
    if in_records.is_empty() || ood_records.is_empty() {
        return Err(VogError::validation(
            "quartile representation needs in-distribution and OoD records",
        ));
    }
    let pooled: Vec<VogRecord> = in_records.iter().chain(ood_records).cloned().collect();
    let ranking = rank(&pooled);
    let n_ood = ood_records.len() as f64;
    let records = ranking.records();
    Ok(percentile_buckets(records.len(), 4)
        .into_iter()
        .enumerate()
        .map(|(q, range)| {
            let n_total = range.len();
            let ood = records[range]
                .iter()
                .filter(|r| r.split == crate::data::Split::Ood)
                .count();
            QuartileRow {
                quartile: q + 1,
                n_total,
                n_ood: ood,
                ood_share_of_quartile: if n_total == 0 { 0.0 } else { ood as f64 / n_total as f64 },
                fraction_of_ood: ood as f64 / n_ood,
            }
        })
        .collect())
}
