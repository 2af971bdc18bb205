//! Error rates bucketed by VoG percentile, early/late stage comparison,
//! run-to-run stability and class-level summaries.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::stats::{correlation_p, correlations, spearman, Correlation};
use crate::data::LabeledDataset;
use crate::engine::{compute_vog, percentile_buckets, rank, LabelSource, VogOptions, VogRanking, VogRecord};
use crate::error::{Result, VogError};
use crate::training::{CheckpointSet, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    /// 1 = lowest VoG.
    pub decile: usize,
    pub percentile_lo: f64,
    pub percentile_hi: f64,
    pub n_examples: usize,
    pub top1_error_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecileErrorTable {
    pub stage: Stage,
    pub rows: Vec<DecileRow>,
}

impl DecileErrorTable {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.top1_error_percent).collect()
    }

    /// Spearman correlation of decile index with error and its p-value, or
    /// `None` when the errors are constant.
    pub fn trend(&self) -> Option<(f64, f64)> {
        let idx: Vec<f64> = self.rows.iter().map(|r| r.decile as f64).collect();
        spearman(&idx, &self.errors())
            .ok()
            .map(|rho| (rho, correlation_p(rho, idx.len())))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,decile,percentile_lo,percentile_hi,n_examples,top1_error_percent\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.stage.as_str(),
                r.decile,
                r.percentile_lo,
                r.percentile_hi,
                r.n_examples,
                r.top1_error_percent
            ));
        }
        out
    }
}

/// Top-1 error per VoG decile; `correctness` maps example id to whether the
/// final model classified it correctly.
pub fn decile_error(ranking: &VogRanking, correctness: &HashMap<usize, bool>) -> Result<DecileErrorTable> {
    let records = ranking.records();
    if records.is_empty() {
        return Err(VogError::validation("decile table needs at least one record"));
    }
    let stage = records[0].stage;
    let rows = percentile_buckets(records.len(), 10)
        .into_iter()
        .enumerate()
        .map(|(i, range)| {
            let n = range.len();
            let mut wrong = 0usize;
            for r in &records[range] {
                match correctness.get(&r.example_id) {
                    Some(true) => {}
                    Some(false) => wrong += 1,
                    None => {
                        return Err(VogError::validation(format!(
                            "no correctness entry for example {}",
                            r.example_id
                        )))
                    }
                }
            }
            Ok(DecileRow {
                decile: i + 1,
                percentile_lo: 10.0 * i as f64,
                percentile_hi: 10.0 * (i + 1) as f64,
                n_examples: n,
                top1_error_percent: if n == 0 { 0.0 } else { 100.0 * wrong as f64 / n as f64 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecileErrorTable { stage, rows })
}

/// Correctness taken from each record's own true and predicted labels.
pub fn correctness_of(records: &[VogRecord]) -> HashMap<usize, bool> {
    records.iter().map(|r| (r.example_id, r.is_correct())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFlipReport {
    pub early: DecileErrorTable,
    pub late: DecileErrorTable,
    pub early_rho: Option<f64>,
    pub late_rho: Option<f64>,
    pub flip_detected: bool,
}

/// A flip means the decile/error correlations have strictly opposite signs.
pub fn stage_flip_from_tables(early: DecileErrorTable, late: DecileErrorTable) -> StageFlipReport {
    let early_rho = early.trend().map(|t| t.0);
    let late_rho = late.trend().map(|t| t.0);
    let flip_detected = matches!((early_rho, late_rho), (Some(e), Some(l)) if e * l < 0.0);
    StageFlipReport {
        early,
        late,
        early_rho,
        late_rho,
        flip_detected,
    }
}

/// Early- and late-stage decile tables on `data`, both measured against the
/// final model's predictions.
pub fn stage_flip_report(
    cs: &CheckpointSet,
    data: &LabeledDataset,
    label_source: LabelSource,
    workers: usize,
) -> Result<StageFlipReport> {
    let trained = cs.entries().iter().filter(|e| e.epoch != 0).count();
    if trained < 6 {
        return Err(VogError::validation(format!(
            "stage flip needs at least 6 checkpoints after epoch 0, found {trained}"
        )));
    }
    let table = |stage| -> Result<DecileErrorTable> {
        let recs = compute_vog(cs, data, VogOptions::new(label_source, stage).with_workers(workers))?;
        decile_error(&rank(&recs), &correctness_of(&recs))
    };
    Ok(stage_flip_from_tables(table(Stage::Early)?, table(Stage::Late)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub spearman_rho: f64,
    pub spearman_p: f64,
    pub deciles_a: Vec<f64>,
    pub deciles_b: Vec<f64>,
    /// Largest absolute per-decile error difference, in percentage points.
    pub max_decile_spread: f64,
}

/// Compares two independently trained runs scored on the same examples.
pub fn stability(a: &[VogRecord], b: &[VogRecord]) -> Result<StabilityReport> {
    let by_id: HashMap<usize, &VogRecord> = b.iter().map(|r| (r.example_id, r)).collect();
    let mut xs = Vec::with_capacity(a.len());
    let mut ys = Vec::with_capacity(a.len());
    for r in a {
        let other = by_id.get(&r.example_id).ok_or_else(|| {
            VogError::validation(format!("example {} missing from the second run", r.example_id))
        })?;
        xs.push(r.normalized_vog);
        ys.push(other.normalized_vog);
    }
    if by_id.len() != a.len() {
        return Err(VogError::validation("runs cover different example sets"));
    }
    let rho = spearman(&xs, &ys)?;
    let da = decile_error(&rank(a), &correctness_of(a))?.errors();
    let db = decile_error(&rank(b), &correctness_of(b))?.errors();
    let spread = da
        .iter()
        .zip(&db)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(StabilityReport {
        n: xs.len(),
        spearman_rho: rho,
        spearman_p: correlation_p(rho, xs.len()),
        deciles_a: da,
        deciles_b: db,
        max_decile_spread: spread,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassLevelRow {
    pub class: usize,
    pub n: usize,
    pub mean_raw_vog: f64,
    /// False negative rate: share of the class's examples predicted as something else.
    pub error_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassLevelReport {
    pub rows: Vec<ClassLevelRow>,
    pub correlation: Option<Correlation>,
}

/// Per-class mean raw VoG against per-class error, grouped by true label.
pub fn class_level_report(records: &[VogRecord]) -> ClassLevelReport {
    let mut groups: BTreeMap<usize, (usize, f64, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.true_label).or_default();
        g.0 += 1;
        g.1 += r.raw_vog;
        g.2 += usize::from(!r.is_correct());
    }
    let rows: Vec<ClassLevelRow> = groups
        .into_iter()
        .map(|(class, (n, sum, wrong))| ClassLevelRow {
            class,
            n,
            mean_raw_vog: sum / n as f64,
            error_rate: wrong as f64 / n as f64,
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.mean_raw_vog).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error_rate).collect();
    ClassLevelReport {
        correlation: correlations(&xs, &ys).ok(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn recs(n: usize) -> Vec<VogRecord> {
        (0..n)
            .map(|i| VogRecord {
                example_id: i,
                split: Split::Test,
                true_label: 0,
                predicted_label: 0,
                raw_vog: i as f64,
                normalized_vog: i as f64,
                label_source: LabelSource::True,
                stage: Stage::Late,
            })
            .collect()
    }

    #[test]
    fn all_correct_and_top_decile_wrong() {
        let r = recs(100);
        let ranking = rank(&r);
        let all: HashMap<usize, bool> = (0..100).map(|i| (i, true)).collect();
        assert!(decile_error(&ranking, &all).unwrap().errors().iter().all(|&e| e == 0.0));
        let top: HashMap<usize, bool> = (0..100).map(|i| (i, i < 90)).collect();
        let t = decile_error(&ranking, &top).unwrap();
        let mut expected = vec![0.0; 9];
        expected.push(100.0);
        assert_eq!(t.errors(), expected);
        assert_eq!(t.rows.iter().map(|r| r.n_examples).sum::<usize>(), 100);
    }

    #[test]
    fn missing_correctness_names_the_id() {
        let ranking = rank(&recs(12));
        let partial: HashMap<usize, bool> = (0..11).map(|i| (i, true)).collect();
        let err = decile_error(&ranking, &partial).unwrap_err();
        assert!(err.to_string().contains("11"));
    }

    fn table(errors: &[f64]) -> DecileErrorTable {
        DecileErrorTable {
            stage: Stage::Late,
            rows: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| DecileRow {
                    decile: i + 1,
                    percentile_lo: 10.0 * i as f64,
                    percentile_hi: 10.0 * (i + 1) as f64,
                    n_examples: 10,
                    top1_error_percent: e,
                })
                .collect(),
        }
    }

    #[test]
    fn flip_detection() {
        let down: Vec<f64> = (0..10).map(|i| 50.0 - 5.0 * i as f64).collect();
        let up: Vec<f64> = (0..10).map(|i| 5.0 * i as f64).collect();
        assert!(stage_flip_from_tables(table(&down), table(&up)).flip_detected);
        assert!(!stage_flip_from_tables(table(&up), table(&up)).flip_detected);
        let flat = vec![3.0; 10];
        assert!(!stage_flip_from_tables(table(&flat), table(&flat)).flip_detected);
    }
}
