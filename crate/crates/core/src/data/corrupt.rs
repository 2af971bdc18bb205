use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Result, VogError};
use crate::tensor::Tensor;

/// Locally generated distribution shifts. All outputs are clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    /// Shift right by `dx` and down by `dy` pixels, zero fill.
    Translate { dx: i32, dy: i32 },
    /// Quarter turn clockwise; needs square images.
    Rotate90,
    /// Additive i.i.d. Gaussian pixel noise.
    Noise { std: f64 },
    /// Box filter of odd width `kernel`, averaging only in-bounds pixels.
    Blur { kernel: usize },
}

pub fn corrupt(data: &LabeledDataset, kind: Corruption, seed: u64) -> Result<LabeledDataset> {
    let shape = data.image_shape().to_vec();
    if shape.len() != 3 {
        return Err(VogError::validation("corruptions need C x H x W images"));
    }
    let (h, w) = (shape[1], shape[2]);
    match kind {
        Corruption::Rotate90 if h != w => {
            return Err(VogError::validation(format!(
                "rotate90 needs square images, got {h}x{w}"
            )))
        }
        Corruption::Noise { std } if !(std >= 0.0 && std.is_finite()) => {
            return Err(VogError::validation("noise std must be finite and non-negative"))
        }
        Corruption::Blur { kernel } if kernel == 0 || kernel % 2 == 0 || kernel > h.min(w) => {
            return Err(VogError::validation(format!(
                "blur kernel must be odd and at most {}, got {kernel}",
                h.min(w)
            )))
        }
        _ => {}
    }

    let mut out = data.clone();
    for e in &mut out.examples {
        let src = e.image.data();
        let mut dst = vec![0.0; src.len()];
        match kind {
            Corruption::Translate { dx, dy } => {
                for c in 0..shape[0] {
                    for r in 0..h {
                        for col in 0..w {
                            let (sr, sc) = (r as i64 - dy as i64, col as i64 - dx as i64);
                            if sr >= 0 && sc >= 0 && (sr as usize) < h && (sc as usize) < w {
                                dst[(c * h + r) * w + col] = src[(c * h + sr as usize) * w + sc as usize];
                            }
                        }
                    }
                }
            }
            Corruption::Rotate90 => {
                for c in 0..shape[0] {
                    for r in 0..h {
                        for col in 0..w {
                            dst[(c * h + r) * w + col] = src[(c * h + (h - 1 - col)) * w + r];
                        }
                    }
                }
            }
            Corruption::Noise { std } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(e.id as u64);
                let normal = Normal::new(0.0, std).expect("validated std");
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = s + normal.sample(&mut rng);
                }
            }
            Corruption::Blur { kernel } => {
                let half = (kernel / 2) as i64;
                for c in 0..shape[0] {
                    for r in 0..h as i64 {
                        for col in 0..w as i64 {
                            let (mut acc, mut n) = (0.0, 0usize);
                            for rr in (r - half).max(0)..=(r + half).min(h as i64 - 1) {
                                for cc in (col - half).max(0)..=(col + half).min(w as i64 - 1) {
                                    acc += src[(c * h + rr as usize) * w + cc as usize];
                                    n += 1;
                                }
                            }
                            dst[(c * h + r as usize) * w + col as usize] = acc / n as f64;
                        }
                    }
                }
            }
        }
        for v in &mut dst {
            *v = v.clamp(0.0, 1.0);
        }
        e.image = Tensor::new(shape.clone(), dst)?;
    }
    out.provenance = format!("{} | corrupt({kind:?}, seed={seed})", data.provenance);
    Ok(out)
}
