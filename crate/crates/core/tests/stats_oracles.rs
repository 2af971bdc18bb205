mod common;

use common::oracles::{brute_aupr, compare_rank_metrics, t_cdf_quadrature};
use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vog::data::Split;
use vog::engine::{rank, LabelSource, VogRecord};
use vog::evaluation::{
    aupr, correlations, decile_error, spearman, student_t_cdf, welch_ttest, PositiveClass,
    Summary,
};
use vog::training::Stage;

#[test]
fn t_cdf_matches_quadrature() {
    for &dof in &[3.0, 4.5, 7.3, 12.0, 24.99, 60.0, 2596.06] {
        for &t in &[-6.0, -2.46, -1.0, -0.1, 0.0, 0.3, 1.7, 3.2, 8.0] {
            let got = student_t_cdf(t, dof);
            let want = t_cdf_quadrature(t, dof);
            assert!((got - want).abs() < 1e-8, "t={t} dof={dof}: {got} vs {want}");
        }
    }
}

#[test]
fn t_cdf_cauchy_closed_form() {
    for &t in &[-10.0, -1.0, 0.0, 0.5, 3.0] {
        let want = 0.5 + f64::atan(t) / PI;
        assert!((student_t_cdf(t, 1.0) - want).abs() < 1e-10);
    }
}

#[test]
fn welch_on_reported_cifar_summaries_rejects() {
    let blocks = [
        (Summary::new(0.62, 0.54, 40_000), Summary::new(0.85, 0.75, 10_000)),
        (Summary::new(0.54, 0.46, 40_000), Summary::new(0.82, 0.71, 10_000)),
    ];
    for (clean, shuffled) in blocks {
        let r = welch_ttest(clean, shuffled, 0.05).unwrap();
        assert!(r.p_value < 0.001);
        assert!(r.reject_at_alpha);
        assert!(r.t_statistic < 0.0);
        let se = (clean.std.powi(2) / clean.n as f64 + shuffled.std.powi(2) / shuffled.n as f64).sqrt();
        assert!((r.t_statistic - (clean.mean - shuffled.mean) / se).abs() < 1e-12);
    }
}

#[test]
fn welch_identical_summaries() {
    let s = Summary::new(1.0, 0.5, 30);
    let r = welch_ttest(s, s, 0.05).unwrap();
    assert_eq!(r.t_statistic, 0.0);
    assert!((r.p_value - 1.0).abs() < 1e-12);
    assert!(!r.reject_at_alpha);
}

#[test]
fn auroc_and_aupr_match_exhaustive_oracles() {
    let cmp = compare_rank_metrics(8);
    assert_eq!(cmp.instances, 200);
    assert_eq!(cmp.auroc_bit_mismatches, 0);
    assert!(cmp.max_aupr_err < 1e-12, "{}", cmp.max_aupr_err);
}

#[test]
fn aupr_hand_case_and_base_rate() {
    let v = aupr(&[0.8, 0.3], &[0.5, 0.1], PositiveClass::In).unwrap();
    assert!((v - brute_aupr(&[0.8, 0.3], &[0.5, 0.1])).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pos: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
    let neg: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
    let v = aupr(&pos, &neg, PositiveClass::In).unwrap();
    assert!((v - 0.5).abs() < 0.05, "{v}");
    let top: Vec<f64> = (0..10).map(|i| 10.0 + i as f64).collect();
    assert_eq!(aupr(&top, &pos, PositiveClass::In).unwrap(), 1.0);
}

#[test]
fn correlation_hand_cases() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    assert!((spearman(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
    let c = correlations(&xs, &ys).unwrap();
    assert!((c.pearson_r - 1.0).abs() < 1e-12 && (c.spearman_rho - 1.0).abs() < 1e-12);
    let cubes: Vec<f64> = xs.iter().map(|x: &f64| -x.powi(3)).collect();
    assert!((spearman(&xs, &cubes).unwrap() + 1.0).abs() < 1e-12);
    assert!(correlations(&xs, &[2.0; 4]).is_err());
}

fn record(id: usize, score: f64) -> VogRecord {
    VogRecord {
        example_id: id,
        split: Split::Test,
        true_label: 0,
        predicted_label: 0,
        raw_vog: score.abs(),
        normalized_vog: score,
        label_source: LabelSource::Predicted,
        stage: Stage::Late,
    }
}

#[test]
fn decile_errors_match_group_by_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(10..300);
        let records: Vec<VogRecord> = (0..n).map(|i| record(i, rng.random_range(-2.0..2.0))).collect();
        let correct: HashMap<usize, bool> = (0..n).map(|i| (i, rng.random_bool(0.7))).collect();
        let table = decile_error(&rank(&records), &correct).unwrap();

        let mut order: Vec<&VogRecord> = records.iter().collect();
        order.sort_by(|a, b| a.normalized_vog.total_cmp(&b.normalized_vog).then(a.example_id.cmp(&b.example_id)));
        let (base, extra) = (n / 10, n % 10);
        let mut start = 0;
        for (d, row) in table.rows.iter().enumerate() {
            let size = base + usize::from(d < extra);
            let wrong = order[start..start + size].iter().filter(|r| !correct[&r.example_id]).count();
            let want = if size == 0 { 0.0 } else { 100.0 * wrong as f64 / size as f64 };
            assert_eq!(row.n_examples, size);
            assert!((row.top1_error_percent - want).abs() < 1e-12);
            start += size;
        }
        assert_eq!(start, n);
    }
}

#[test]
fn decile_error_names_missing_id() {
    let records: Vec<VogRecord> = (0..10).map(|i| record(i, i as f64)).collect();
    let correct: HashMap<usize, bool> = (0..9).map(|i| (i, true)).collect();
    let err = decile_error(&rank(&records), &correct).unwrap_err();
    assert!(err.to_string().contains('9'), "{err}");
}
