use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split};
use crate::error::{Result, VogError};
use crate::io::write_atomic;
use crate::tensor::Tensor;

/// Two isotropic Gaussian clusters in the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobConfig {
    pub n_points: usize,
    pub centers: [[f64; 2]; 2],
    pub cluster_std: f64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    0.9
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            n_points: 1000,
            centers: [[-2.0, -2.0], [2.0, 2.0]],
            cluster_std: 1.0,
            train_fraction: default_train_fraction(),
            seed: 0,
        }
    }
}

/// Samples the clusters (class `i` from center `i`, alternating so the classes
/// stay balanced) and splits them with a seeded shuffle. Points are stored as
/// `1 x 1 x 2` tensors.
pub fn make_blobs(cfg: &BlobConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    if cfg.n_points < 2 {
        return Err(VogError::validation("make_blobs needs at least 2 points"));
    }
    if !(cfg.cluster_std >= 0.0 && cfg.cluster_std.is_finite()) {
        return Err(VogError::validation("cluster_std must be finite and non-negative"));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(VogError::validation("train_fraction must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points: Vec<([f64; 2], usize)> = (0..cfg.n_points)
        .map(|i| {
            let label = i % 2;
            let c = cfg.centers[label];
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            ([c[0] + cfg.cluster_std * dx, c[1] + cfg.cluster_std * dy], label)
        })
        .collect();
    points.shuffle(&mut rng);

    let n_train = ((cfg.train_fraction * cfg.n_points as f64).round() as usize)
        .clamp(1, cfg.n_points - 1);
    let provenance = format!(
        "blobs(n={}, centers={:?}, std={}, seed={})",
        cfg.n_points, cfg.centers, cfg.cluster_std, cfg.seed
    );
    let build = |pts: &[([f64; 2], usize)], split| {
        let images = pts
            .iter()
            .map(|(p, _)| Tensor::new(vec![1, 1, 2], p.to_vec()).expect("point tensor"))
            .collect();
        let labels = pts.iter().map(|&(_, l)| l).collect();
        LabeledDataset::from_parts(images, labels, split, 2, provenance.clone())
    };
    Ok((
        build(&points[..n_train], Split::Train)?,
        build(&points[n_train..], Split::Test)?,
    ))
}

/// Writes `example_id,x0,x1,label,split` rows for any number of 2-D datasets.
pub fn write_blobs_csv(path: &Path, sets: &[&LabeledDataset]) -> Result<()> {
    let mut out = String::from("example_id,x0,x1,label,split\n");
    for ds in sets {
        if ds.image_shape().iter().product::<usize>() != 2 {
            return Err(VogError::validation("blob CSV export needs 2-D points"));
        }
        for e in &ds.examples {
            let p = e.image.data();
            out.push_str(&format!(
                "{},{:?},{:?},{},{}\n",
                e.id,
                p[0],
                p[1],
                e.label,
                ds.split.as_str()
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Reads the rows of one split back from a blob CSV.
pub fn load_blobs_csv(path: &Path, split: Split) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| VogError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("example_id,x0,x1,label,split") {
        return Err(VogError::Format {
            field: "header",
            message: format!("{} is not a blob CSV", path.display()),
        });
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = |field: &'static str| VogError::Format {
            field,
            message: format!("line {}: `{line}`", lineno + 2),
        };
        if cols.len() != 5 {
            return Err(bad("row"));
        }
        if cols[4].parse::<Split>()? != split {
            continue;
        }
        if cols[0].parse::<usize>().map_err(|_| bad("example_id"))? != images.len() {
            return Err(bad("example_id"));
        }
        let x0: f64 = cols[1].parse().map_err(|_| bad("x0"))?;
        let x1: f64 = cols[2].parse().map_err(|_| bad("x1"))?;
        labels.push(cols[3].parse::<usize>().map_err(|_| bad("label"))?);
        images.push(Tensor::new(vec![1, 1, 2], vec![x0, x1])?);
    }
    LabeledDataset::from_parts(images, labels, split, 2, format!("csv:{}", path.display()))
}
