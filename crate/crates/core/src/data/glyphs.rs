//! Procedurally rendered digit-like glyphs: an MNIST-scale stand-in that can be
//! generated offline. Each class is a seven-segment stroke pattern drawn with a
//! random affine jitter and stroke width. A per-example blend weight mixes in a
//! second class's glyph, so the set spans easy prototypes through genuinely
//! ambiguous images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split};
use crate::error::{Result, VogError};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlyphConfig {
    pub n: usize,
    pub size: usize,
    pub num_classes: usize,
    /// Std of additive pixel noise before clipping.
    pub noise_std: f64,
    /// Upper bound of the distractor blend weight; the weight is `max_blend * u^2`.
    pub max_blend: f64,
    pub split: Split,
    pub seed: u64,
}

impl Default for GlyphConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            size: 28,
            num_classes: 10,
            noise_std: 0.1,
            max_blend: 0.6,
            split: Split::Train,
            seed: 0,
        }
    }
}

type Segment = ((f64, f64), (f64, f64));

// (x, y) in the unit square, y pointing down.
const SEGMENTS: [Segment; 9] = [
    ((0.3, 0.2), (0.7, 0.2)),  // a top
    ((0.7, 0.2), (0.7, 0.5)),  // b upper right
    ((0.7, 0.5), (0.7, 0.8)),  // c lower right
    ((0.3, 0.8), (0.7, 0.8)),  // d bottom
    ((0.3, 0.5), (0.3, 0.8)),  // e lower left
    ((0.3, 0.2), (0.3, 0.5)),  // f upper left
    ((0.3, 0.5), (0.7, 0.5)),  // g middle
    ((0.3, 0.8), (0.7, 0.2)),  // h rising diagonal
    ((0.5, 0.2), (0.5, 0.8)),  // i centre vertical
];

const PATTERNS: [&[usize]; 10] = [
    &[0, 1, 2, 3, 4, 5],    // 0
    &[8],                   // 1
    &[0, 1, 6, 4, 3],       // 2
    &[0, 1, 6, 2, 3],       // 3
    &[5, 6, 1, 2],          // 4
    &[0, 5, 6, 2, 3],       // 5
    &[0, 5, 4, 3, 2, 6],    // 6
    &[0, 7],                // 7
    &[0, 1, 2, 3, 4, 5, 6], // 8
    &[6, 5, 0, 1, 2, 3],    // 9
];

struct Jitter {
    dx: f64,
    dy: f64,
    scale: f64,
    angle: f64,
    width: f64,
}

impl Jitter {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        Self {
            dx: rng.random_range(-0.08..0.08),
            dy: rng.random_range(-0.08..0.08),
            scale: rng.random_range(0.85..1.1),
            angle: rng.random_range(-0.15..0.15),
            width: rng.random_range(0.035..0.065),
        }
    }

    fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let (cx, cy) = (x - 0.5, y - 0.5);
        let (s, c) = self.angle.sin_cos();
        (
            0.5 + self.dx + self.scale * (c * cx - s * cy),
            0.5 + self.dy + self.scale * (s * cx + c * cy),
        )
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    (dx * dx + dy * dy).sqrt()
}

fn render(class: usize, jitter: &Jitter, size: usize) -> Vec<f64> {
    let segs: Vec<Segment> = PATTERNS[class]
        .iter()
        .map(|&s| (jitter.apply(SEGMENTS[s].0), jitter.apply(SEGMENTS[s].1)))
        .collect();
    let aa = 1.0 / size as f64;
    let mut img = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let p = ((c as f64 + 0.5) / size as f64, (r as f64 + 0.5) / size as f64);
            let d = segs
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            img.push((1.0 - (d - jitter.width) / aa).clamp(0.0, 1.0));
        }
    }
    img
}

/// Generates `cfg.n` single-channel glyph images with balanced labels.
pub fn make_glyphs(cfg: &GlyphConfig) -> Result<LabeledDataset> {
    if cfg.n == 0 {
        return Err(VogError::validation("make_glyphs needs n >= 1"));
    }
    if !(2..=PATTERNS.len()).contains(&cfg.num_classes) {
        return Err(VogError::validation(format!(
            "num_classes must be in 2..={}",
            PATTERNS.len()
        )));
    }
    if cfg.size < 8 {
        return Err(VogError::validation("glyph size must be at least 8 pixels"));
    }
    if !(0.0..=1.0).contains(&cfg.max_blend) || !(cfg.noise_std >= 0.0) {
        return Err(VogError::validation("max_blend must be in [0, 1] and noise_std >= 0"));
    }
    let mut images = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let label = i % cfg.num_classes;
        let jitter = Jitter::sample(&mut rng);
        let mut img = render(label, &jitter, cfg.size);

        let u: f64 = rng.random();
        let blend = cfg.max_blend * u * u;
        let other = (label + rng.random_range(1..cfg.num_classes)) % cfg.num_classes;
        if blend > 0.0 {
            let distractor = render(other, &Jitter::sample(&mut rng), cfg.size);
            for (p, q) in img.iter_mut().zip(distractor) {
                *p = (1.0 - blend) * *p + blend * q;
            }
        }
        for p in &mut img {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = (*p + cfg.noise_std * z).clamp(0.0, 1.0);
        }
        images.push(Tensor::new(vec![1, cfg.size, cfg.size], img)?);
        labels.push(label);
    }
    LabeledDataset::from_parts(
        images,
        labels,
        cfg.split,
        cfg.num_classes,
        format!(
            "glyphs(n={}, size={}, classes={}, noise={}, max_blend={}, seed={})",
            cfg.n, cfg.size, cfg.num_classes, cfg.noise_std, cfg.max_blend, cfg.seed
        ),
    )
}
