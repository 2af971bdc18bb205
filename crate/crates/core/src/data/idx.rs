//! The IDX container used by MNIST: a big-endian magic number (`0x00000803`
//! for u8 image cubes, `0x00000801` for u8 label vectors), big-endian u32
//! dimension sizes, then raw bytes.

use std::path::Path;

use super::{LabeledDataset, Split};
use crate::error::{Result, VogError};
use crate::io::write_atomic;
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, field: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| VogError::Format {
            field,
            message: format!("file truncated before byte {}", offset + 4),
        })
}

/// Parses an image file into `(rows, cols, pixels)`, with pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(VogError::Format {
            field: "magic",
            message: format!("expected {IDX_IMAGES_MAGIC:#010x} for images, found {magic:#010x}"),
        });
    }
    let count = read_u32(bytes, 4, "count")? as usize;
    let rows = read_u32(bytes, 8, "rows")? as usize;
    let cols = read_u32(bytes, 12, "cols")? as usize;
    if rows == 0 || cols == 0 {
        return Err(VogError::Format {
            field: "rows",
            message: "image dimensions must be positive".into(),
        });
    }
    let pixels = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * pixels {
        return Err(VogError::Format {
            field: "pixels",
            message: format!(
                "header declares {count} images of {rows}x{cols} ({} bytes), body has {}",
                count * pixels,
                body.len()
            ),
        });
    }
    let images = body
        .chunks_exact(pixels)
        .map(|chunk| chunk.iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(VogError::Format {
            field: "magic",
            message: format!("expected {IDX_LABELS_MAGIC:#010x} for labels, found {magic:#010x}"),
        });
    }
    let count = read_u32(bytes, 4, "count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(VogError::Format {
            field: "labels",
            message: format!("header declares {count} labels, body has {}", body.len()),
        });
    }
    Ok(body.to_vec())
}

/// Loads an image/label file pair as a single-channel dataset. The class
/// count is one more than the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<LabeledDataset> {
    let img_bytes = std::fs::read(images_path).map_err(|e| VogError::io(images_path, e))?;
    let lbl_bytes = std::fs::read(labels_path).map_err(|e| VogError::io(labels_path, e))?;
    let (rows, cols, images) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if images.len() != labels.len() {
        return Err(VogError::Format {
            field: "count",
            message: format!(
                "{} has {} images but {} has {} labels",
                images_path.display(),
                images.len(),
                labels_path.display(),
                labels.len()
            ),
        });
    }
    let class_count = labels.iter().copied().max().map_or(0, |m| m as usize + 1).max(2);
    let tensors = images
        .into_iter()
        .map(|px| Tensor::new(vec![1, rows, cols], px))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_parts(
        tensors,
        labels.into_iter().map(usize::from).collect(),
        split,
        class_count,
        format!("idx:{}", images_path.display()),
    )
}

/// Encodes a single-channel dataset as IDX bytes, quantizing pixels with
/// `round(255 * v)`.
pub fn encode_idx(ds: &LabeledDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let shape = ds.image_shape();
    if shape.len() != 3 || shape[0] != 1 {
        return Err(VogError::validation(format!(
            "IDX export needs 1 x H x W images, got {shape:?}"
        )));
    }
    let mut images = Vec::with_capacity(16 + ds.len() * shape[1] * shape[2]);
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for d in [ds.len(), shape[1], shape[2]] {
        images.extend_from_slice(&(d as u32).to_be_bytes());
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    for e in &ds.examples {
        images.extend(
            e.image
                .data()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        let label = u8::try_from(e.label).map_err(|_| {
            VogError::validation(format!("label {} does not fit in an IDX byte", e.label))
        })?;
        labels.push(label);
    }
    Ok((images, labels))
}

pub fn write_idx(ds: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (images, labels) = encode_idx(ds)?;
    write_atomic(images_path, &images)?;
    write_atomic(labels_path, &labels)
}
