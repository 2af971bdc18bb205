//! Student-t distribution, Welch's t-test and correlation coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VogError};

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t with `dof` degrees of freedom.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `P(|T| >= |t|)`.
pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Mean, standard deviation and size of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn new(mean: f64, std: f64, n: usize) -> Self {
        Self { mean, std, n }
    }

    /// Uses the unbiased (n - 1) standard deviation.
    pub fn of(sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(VogError::validation("a sample summary needs at least 2 values"));
        }
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            std: var.sqrt(),
            n: sample.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub mean1: f64,
    pub std1: f64,
    pub n1: usize,
    pub mean2: f64,
    pub std2: f64,
    pub n2: usize,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject_at_alpha: bool,
}

/// Two-sample t-test with unequal variances; two-sided p-value.
pub fn welch_ttest(s1: Summary, s2: Summary, alpha: f64) -> Result<WelchResult> {
    if s1.n < 2 || s2.n < 2 {
        return Err(VogError::validation("Welch's t-test needs n >= 2 in both samples"));
    }
    if s1.std < 0.0 || s2.std < 0.0 || !s1.std.is_finite() || !s2.std.is_finite() {
        return Err(VogError::validation("standard deviations must be finite and non-negative"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(VogError::validation("alpha must lie in [0, 1)"));
    }
    let (n1, n2) = (s1.n as f64, s2.n as f64);
    let (v1, v2) = (s1.std * s1.std / n1, s2.std * s2.std / n2);
    let se2 = v1 + v2;
    let (t, dof, p) = if se2 == 0.0 {
        if s1.mean == s2.mean {
            (0.0, n1 + n2 - 2.0, 1.0)
        } else {
            let t = if s1.mean > s2.mean { f64::INFINITY } else { f64::NEG_INFINITY };
            (t, n1 + n2 - 2.0, 0.0)
        }
    } else {
        let t = (s1.mean - s2.mean) / se2.sqrt();
        let dof = se2 * se2 / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
        (t, dof, two_sided_p(t, dof))
    };
    Ok(WelchResult {
        mean1: s1.mean,
        std1: s1.std,
        n1: s1.n,
        mean2: s2.mean,
        std2: s2.std,
        n2: s2.n,
        t_statistic: t,
        degrees_of_freedom: dof,
        p_value: p,
        alpha,
        reject_at_alpha: p < alpha,
    })
}

pub fn welch_ttest_samples(a: &[f64], b: &[f64], alpha: f64) -> Result<WelchResult> {
    welch_ttest(Summary::of(a)?, Summary::of(b)?, alpha)
}

/// Mid-ranks (1-based, ties share their average rank).
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
}

fn pearson_raw(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(VogError::Undefined("one of the inputs has zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// p-value of a correlation coefficient through `t = r sqrt((n-2)/(1-r^2))`.
pub fn correlation_p(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let dof = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (dof / (1.0 - r * r)).sqrt();
    two_sided_p(t, dof)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson_raw(xs, ys)
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson_raw(&ranks(xs), &ranks(ys))
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(VogError::validation(format!(
            "correlation inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(VogError::validation("correlation needs at least 3 pairs"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(VogError::validation("correlation inputs must be finite"));
    }
    Ok(())
}

/// Pearson and Spearman coefficients with their t-approximation p-values.
pub fn correlations(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    let r = pearson(xs, ys)?;
    let rho = spearman(xs, ys)?;
    Ok(Correlation {
        n: xs.len(),
        pearson_r: r,
        pearson_p: correlation_p(r, xs.len()),
        spearman_rho: rho,
        spearman_p: correlation_p(rho, xs.len()),
    })
}
