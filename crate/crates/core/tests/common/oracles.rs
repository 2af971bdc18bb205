use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use vog::data::{LabeledDataset, Split};
use vog::engine::{compute_vog, LabelSource, VogOptions};
use vog::evaluation::{aupr, auroc, PositiveClass};
use vog::nn::{argmax, ModelSpec};
use vog::training::{train, Stage, TrainConfig};
use vog::Tensor;

/// Two-pass population variance per pixel, written as plain loops over a
/// `[K][C][H][W]` gradient array.
pub fn brute_force_vog(grads: &[Vec<f64>], c: usize, h: usize, w: usize) -> f64 {
    let k = grads.len();
    let mut total = 0.0;
    for r in 0..h {
        for col in 0..w {
            let mut s = vec![0.0; k];
            for t in 0..k {
                let mut acc = 0.0;
                for ch in 0..c {
                    acc += grads[t][ch * h * w + r * w + col];
                }
                s[t] = acc / c as f64;
            }
            let mut mean = 0.0;
            for t in 0..k {
                mean += s[t];
            }
            mean /= k as f64;
            let mut var = 0.0;
            for t in 0..k {
                var += (s[t] - mean) * (s[t] - mean);
            }
            total += (var / k as f64).sqrt();
        }
    }
    total / (h * w) as f64
}

#[derive(Default)]
pub struct VogComparison {
    pub instances: usize,
    pub max_rel_err: f64,
    pub failures: Vec<String>,
}

/// Trains 20 small random models (K from 2 to 8 stored checkpoints) and
/// compares every engine score with the scalar-loop oracle, under both label
/// sources.
pub fn compare_engine_with_oracle(seed: u64, tol: f64) -> VogComparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = tempfile::tempdir().unwrap();
    let mut out = VogComparison::default();
    for run in 0..20 {
        let (c, h, w) = (
            rng.random_range(1..=3),
            rng.random_range(3..=5),
            rng.random_range(3..=5),
        );
        let classes = rng.random_range(2..=3);
        let spec = if run % 2 == 0 {
            ModelSpec::mlp([c, h, w], &[rng.random_range(3..=8)], classes)
        } else {
            ModelSpec::small_convnet([c, h, w], 2, 2, 4, classes)
        };
        let n = 5;
        let images: Vec<Tensor> = (0..n)
            .map(|_| {
                Tensor::new(
                    vec![c, h, w],
                    (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let data = LabeledDataset::from_parts(images, labels, Split::Train, classes, "random").unwrap();
        let k = rng.random_range(2..=8);
        let cfg = TrainConfig::constant_lr(k, 2, rng.random_range(0.05..0.5), run);
        let cs = train(&spec, &data, &cfg, &dir.path().join(format!("run{run}"))).unwrap();
        let final_model = cs.final_model().unwrap();
        let trained: Vec<_> = cs.entries().iter().filter(|e| e.epoch > 0).collect();
        assert_eq!(trained.len(), k);

        for source in [LabelSource::True, LabelSource::Predicted] {
            let records = compute_vog(&cs, &data, VogOptions::new(source, Stage::All)).unwrap();
            for (rec, ex) in records.iter().zip(&data.examples) {
                let p = match source {
                    LabelSource::True => ex.label,
                    LabelSource::Predicted => argmax(final_model.forward(&ex.image).unwrap().data()),
                };
                let grads: Vec<Vec<f64>> = trained
                    .iter()
                    .map(|e| {
                        cs.load_model(e)
                            .unwrap()
                            .input_gradient(&ex.image, p)
                            .unwrap()
                            .into_data()
                    })
                    .collect();
                let expected = brute_force_vog(&grads, c, h, w);
                let rel = (rec.raw_vog - expected).abs() / rec.raw_vog.abs().max(expected.abs()).max(1e-300);
                out.max_rel_err = out.max_rel_err.max(rel);
                if rel > tol {
                    out.failures.push(format!("run {run} example {}: engine {} vs oracle {expected}", ex.id, rec.raw_vog));
                }
                out.instances += 1;
            }
        }
    }
    out
}

/// Student-t CDF by integrating the density after `t = sqrt(v) tan(theta)`,
/// which maps it to `cos^(v-1)(theta)` on `(-pi/2, pi/2)`. The normalizing
/// constant is integrated the same way, so no gamma function is involved.
pub fn t_cdf_quadrature(t: f64, dof: f64) -> f64 {
    let f = |theta: f64| theta.cos().powf(dof - 1.0);
    let simpson = |a: f64, b: f64| {
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
        }
        s * h / 3.0
    };
    let theta = (t / dof.sqrt()).atan();
    let total = simpson(-PI / 2.0, PI / 2.0);
    if theta <= 0.0 {
        simpson(-PI / 2.0, theta) / total
    } else {
        1.0 - simpson(theta, PI / 2.0) / total
    }
}

pub fn brute_auroc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &p in pos {
        for &n in neg {
            if p > n {
                twice += 2;
            } else if p == n {
                twice += 1;
            }
        }
    }
    (twice as f64 / 2.0) / (pos.len() as u64 * neg.len() as u64) as f64
}

/// Average precision by enumerating every distinct threshold and counting.
pub fn brute_aupr(pos: &[f64], neg: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = pos.iter().filter(|&&s| s >= t).count() as f64;
        let fp = neg.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / pos.len() as f64;
        area += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    area
}

pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tied {
                rng.random_range(0..6) as f64 / 5.0
            } else {
                rng.random()
            }
        })
        .collect()
}

#[derive(Default)]
pub struct RankMetricComparison {
    pub instances: usize,
    pub auroc_bit_mismatches: usize,
    pub max_aupr_err: f64,
}

/// 200 random score sets with up to 200 per side; every other instance draws
/// from six values so that ties are common.
pub fn compare_rank_metrics(seed: u64) -> RankMetricComparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = RankMetricComparison::default();
    for i in 0..200 {
        let tied = i % 2 == 0;
        let np = rng.random_range(1..=200);
        let nn = rng.random_range(1..=200);
        let pos = random_scores(&mut rng, np, tied);
        let neg = random_scores(&mut rng, nn, tied);
        if auroc(&pos, &neg).unwrap().to_bits() != brute_auroc(&pos, &neg).to_bits() {
            out.auroc_bit_mismatches += 1;
        }
        let flip = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
        let e_in = (aupr(&pos, &neg, PositiveClass::In).unwrap() - brute_aupr(&pos, &neg)).abs();
        let e_out = (aupr(&pos, &neg, PositiveClass::Out).unwrap() - brute_aupr(&flip(&neg), &flip(&pos))).abs();
        out.max_aupr_err = out.max_aupr_err.max(e_in).max(e_out);
        out.instances += 1;
    }
    out
}
