//! Labeled image datasets: synthetic generators, IDX ingestion and corruptions.

mod blobs;
mod corrupt;
mod glyphs;
mod idx;
mod noise;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VogError};
use crate::tensor::Tensor;

pub use blobs::{load_blobs_csv, make_blobs, write_blobs_csv, BlobConfig};
pub use corrupt::{corrupt, Corruption};
pub use glyphs::{make_glyphs, GlyphConfig};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use noise::gaussian_ood;

/// Label carried by out-of-distribution examples, which have no class.
pub const OOD_LABEL: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Ood,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Ood => "ood",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = VogError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "ood" => Ok(Split::Ood),
            other => Err(VogError::validation(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: usize,
    pub image: Tensor,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub examples: Vec<Example>,
    pub split: Split,
    pub class_count: usize,
    pub provenance: String,
}

impl LabeledDataset {
    /// Build from images and labels, assigning ids `0..n`.
    pub fn from_parts(
        images: Vec<Tensor>,
        labels: Vec<usize>,
        split: Split,
        class_count: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(VogError::Format {
                field: "count",
                message: format!("{} images vs {} labels", images.len(), labels.len()),
            });
        }
        let examples = images
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(id, (image, label))| Example { id, image, label })
            .collect();
        let ds = Self {
            examples,
            split,
            class_count,
            provenance: provenance.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn image_shape(&self) -> &[usize] {
        self.examples
            .first()
            .map(|e| e.image.shape())
            .unwrap_or(&[])
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Checks the dataset invariants: nonempty, ids `0..n` in order, one
    /// image shape, labels below `class_count` (except the OoD split).
    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(VogError::validation("dataset is empty"));
        }
        if self.split != Split::Ood && self.class_count < 2 {
            return Err(VogError::validation("class_count must be at least 2"));
        }
        let shape = self.examples[0].image.shape();
        for (i, e) in self.examples.iter().enumerate() {
            if e.id != i {
                return Err(VogError::validation(format!(
                    "example ids must be contiguous from 0: position {i} holds id {}",
                    e.id
                )));
            }
            if e.image.shape() != shape {
                return Err(VogError::Shape {
                    context: "dataset image",
                    expected: shape.to_vec(),
                    got: e.image.shape().to_vec(),
                });
            }
            if self.split == Split::Ood {
                if e.label != OOD_LABEL {
                    return Err(VogError::validation(format!(
                        "ood example {i} carries a class label"
                    )));
                }
            } else if e.label >= self.class_count {
                return Err(VogError::Index {
                    what: "label",
                    index: e.label,
                    bound: self.class_count,
                });
            }
            if !e.image.is_finite() {
                return Err(VogError::validation(format!("example {i} has non-finite pixels")));
            }
        }
        Ok(())
    }

    /// Keep the first `n` examples.
    pub fn truncate(mut self, n: usize) -> Self {
        self.examples.truncate(n);
        self
    }
}
