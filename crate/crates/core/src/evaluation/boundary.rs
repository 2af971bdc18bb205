//! Distance from 2-D points to the decision boundary of a two-class model.
//!
//! The zero set of `A_0^l(x) - A_1^l(x)` is traced on a dense grid over the
//! data's bounding box (expanded by 10% per side): every grid edge whose
//! endpoints change sign is bisected to locate the crossing, crossings within
//! a cell are joined into segments, and each point's distance is the minimum
//! over those segments.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::stats::{correlations, Correlation};
use crate::data::LabeledDataset;
use crate::engine::VogRecord;
use crate::error::{Result, VogError};
use crate::nn::Model;
use crate::tensor::Tensor;

pub const DEFAULT_GRID: usize = 200;
pub const BISECTION_TOL: f64 = 1e-10;

type Point = [f64; 2];

fn margin(model: &Model, p: Point) -> Result<f64> {
    let x = Tensor::new(model.spec().input_shape.to_vec(), p.to_vec())?;
    let out = model.forward(&x)?;
    Ok(out.data()[0] - out.data()[1])
}

fn bisect(model: &Model, mut a: Point, mut fa: f64, mut b: Point) -> Result<Point> {
    loop {
        let dist = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        if dist <= BISECTION_TOL {
            return Ok(mid);
        }
        let fm = margin(model, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((wx - t * vx).powi(2) + (wy - t * vy).powi(2)).sqrt()
}

fn check_model(model: &Model) -> Result<()> {
    let spec = model.spec();
    if spec.num_classes != 2 || spec.input_shape.iter().product::<usize>() != 2 {
        return Err(VogError::Analysis(
            "boundary distances need a two-class model over 2-D inputs".into(),
        ));
    }
    Ok(())
}

/// Boundary segments over the bounding box of `points`.
pub fn boundary_segments(model: &Model, points: &[Point], grid: usize) -> Result<Vec<(Point, Point)>> {
    check_model(model)?;
    if points.is_empty() {
        return Err(VogError::Analysis("no points given".into()));
    }
    let grid = grid.max(2);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    for d in 0..2 {
        let pad = 0.1 * (hi[d] - lo[d]).max(1e-3);
        lo[d] -= pad;
        hi[d] += pad;
    }
    let node = |i: usize, j: usize| -> Point {
        [
            lo[0] + (hi[0] - lo[0]) * i as f64 / (grid - 1) as f64,
            lo[1] + (hi[1] - lo[1]) * j as f64 / (grid - 1) as f64,
        ]
    };
    let mut f = vec![0.0; grid * grid];
    for i in 0..grid {
        for j in 0..grid {
            f[i * grid + j] = margin(model, node(i, j))?;
        }
    }
    let crossing = |a: (usize, usize), b: (usize, usize)| -> Result<Option<Point>> {
        let (fa, fb) = (f[a.0 * grid + a.1], f[b.0 * grid + b.1]);
        let (pa, pb) = (node(a.0, a.1), node(b.0, b.1));
        if fa == 0.0 {
            return Ok(Some(pa));
        }
        if fb == 0.0 {
            return Ok(Some(pb));
        }
        if (fa > 0.0) != (fb > 0.0) {
            return bisect(model, pa, fa, pb).map(Some);
        }
        Ok(None)
    };
    let mut segments = Vec::new();
    for i in 0..grid - 1 {
        for j in 0..grid - 1 {
            let edges = [
                ((i, j), (i + 1, j)),
                ((i + 1, j), (i + 1, j + 1)),
                ((i, j + 1), (i + 1, j + 1)),
                ((i, j), (i, j + 1)),
            ];
            let mut pts = Vec::with_capacity(4);
            for (a, b) in edges {
                if let Some(p) = crossing(a, b)? {
                    pts.push(p);
                }
            }
            match pts.len() {
                0 => {}
                1 => segments.push((pts[0], pts[0])),
                2 => segments.push((pts[0], pts[1])),
                _ => {
                    for a in 0..pts.len() {
                        for b in a + 1..pts.len() {
                            segments.push((pts[a], pts[b]));
                        }
                    }
                }
            }
        }
    }
    if segments.is_empty() {
        return Err(VogError::Analysis(
            "no decision boundary inside the sampled bounding box".into(),
        ));
    }
    Ok(segments)
}

/// Distance of every point to the traced boundary.
pub fn boundary_distances(model: &Model, points: &[Point], grid: usize) -> Result<Vec<f64>> {
    let segments = boundary_segments(model, points, grid)?;
    Ok(points
        .iter()
        .map(|&p| {
            segments
                .iter()
                .map(|&(a, b)| point_segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAnalysis {
    pub distances: Vec<f64>,
    /// VoG (normalized) against distance; `None` when undefined.
    pub correlation: Option<Correlation>,
    pub undefined_reason: Option<String>,
}

/// Distances for a 2-D dataset and their correlation with the records' VoG.
pub fn boundary_distance_analysis(
    model: &Model,
    data: &LabeledDataset,
    records: &[VogRecord],
) -> Result<BoundaryAnalysis> {
    if records.len() != data.len() {
        return Err(VogError::validation("one VoG record per example is required"));
    }
    let points: Vec<Point> = data
        .examples
        .iter()
        .map(|e| {
            let d = e.image.data();
            if d.len() != 2 {
                return Err(VogError::Analysis("boundary analysis needs 2-D points".into()));
            }
            Ok([d[0], d[1]])
        })
        .collect::<Result<_>>()?;
    let distances = boundary_distances(model, &points, DEFAULT_GRID)?;
    let by_id: HashMap<usize, f64> = records.iter().map(|r| (r.example_id, r.normalized_vog)).collect();
    let vog = data
        .examples
        .iter()
        .map(|e| {
            by_id.get(&e.id).copied().ok_or_else(|| {
                VogError::validation(format!("no VoG record for example {}", e.id))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (correlation, undefined_reason) = match correlations(&vog, &distances) {
        Ok(c) => (Some(c), None),
        Err(VogError::Undefined(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(BoundaryAnalysis {
        distances,
        correlation,
        undefined_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerParams, ModelSpec, Params};

    /// logits `[w.x + b, 0]`, boundary is the line `w.x + b = 0`
    fn linear(w: [f64; 2], b: f64) -> Model {
        let spec = ModelSpec::mlp([1, 1, 2], &[], 2);
        let params = Params {
            layers: vec![
                None,
                Some(LayerParams {
                    weight: Tensor::new(vec![2, 2], vec![w[0], w[1], 0.0, 0.0]).unwrap(),
                    bias: Tensor::from_vec(vec![b, 0.0]),
                }),
            ],
            seed: 0,
        };
        Model::new(spec, params).unwrap()
    }

    #[test]
    fn matches_point_to_line_distance() {
        let (w, b) = ([1.0, 2.0], -0.5);
        let model = linear(w, b);
        let pts: Vec<Point> = vec![[-3.0, -2.0], [2.5, 1.0], [0.1, 0.3], [4.0, -3.0], [-1.0, 2.0]];
        let d = boundary_distances(&model, &pts, DEFAULT_GRID).unwrap();
        let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        for (p, got) in pts.iter().zip(d) {
            let exact = (w[0] * p[0] + w[1] * p[1] + b).abs() / norm;
            assert!((got - exact).abs() < 1e-3, "{p:?}: {got} vs {exact}");
        }
    }

    #[test]
    fn no_boundary_in_box() {
        let model = linear([0.0, 0.0], 1.0);
        let err = boundary_distances(&model, &[[0.0, 0.0], [1.0, 1.0]], 20).unwrap_err();
        assert!(matches!(err, VogError::Analysis(_)));
    }
}
