//! On-disk checkpoint store.
//!
//! A checkpoint directory holds `manifest.json` plus one `ckpt_<epoch>.bin`
//! per snapshot. Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "VOGCKPT\0"
//! format_version u32
//! seed           u64
//! tensor_count   u32
//! per tensor:    ndim u32, dims [u64; ndim], len u64, data [f64; len]
//! ```
//!
//! Tensors appear in layer order, weight before bias. The manifest stores a
//! 64-bit FNV-1a digest of each file as 16 hex digits.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Result, VogError};
use crate::io::{fnv1a64, write_atomic};
use crate::nn::{Model, ModelSpec, Params};
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const MAGIC: &[u8; 8] = b"VOGCKPT\0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointEntry {
    pub epoch: usize,
    /// Relative to the manifest's directory.
    pub path: String,
    pub checksum: String,
    /// Mean cross-entropy on the training set at this snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub model_spec: ModelSpec,
    pub train_config: TrainConfig,
    pub entries: Vec<CheckpointEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_shuffle: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Early,
    Late,
    All,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Early => "early",
            Stage::Late => "late",
            Stage::All => "all",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = VogError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(Stage::Early),
            "late" => Ok(Stage::Late),
            "all" => Ok(Stage::All),
            other => Err(VogError::validation(format!(
                "unknown stage `{other}` (expected early, late or all)"
            ))),
        }
    }
}

/// A manifest bound to the directory its paths are relative to.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointSet {
    dir: PathBuf,
    manifest: Manifest,
}

pub fn encode_params(params: &Params) -> Vec<u8> {
    let tensors: Vec<&Tensor> = params.tensors().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&params.seed.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(VogError::Corruption {
                path: self.path.to_path_buf(),
                message: format!("truncated at byte {} (file has {})", self.pos, self.bytes.len()),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses checkpoint bytes against the layer structure of `spec`.
pub fn decode_params(bytes: &[u8], spec: &ModelSpec, path: &Path) -> Result<Params> {
    let corrupt = |message: String| VogError::Corruption {
        path: path.to_path_buf(),
        message,
    };
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(VogError::Format {
            field: "magic",
            message: format!("{} is not a checkpoint file", path.display()),
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(VogError::Format {
            field: "format_version",
            message: format!("found {version}, this build reads {CHECKPOINT_FORMAT_VERSION}"),
        });
    }
    let seed = r.u64()?;
    let count = r.u32()? as usize;
    let mut params = Params::zeros_like(spec);
    params.seed = seed;
    let expected = params.tensors().count();
    if count != expected {
        return Err(corrupt(format!("holds {count} tensors, model needs {expected}")));
    }
    for slot in params.tensors_mut() {
        let ndim = r.u32()? as usize;
        if ndim > 8 {
            return Err(corrupt(format!("implausible tensor rank {ndim}")));
        }
        let dims = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if dims != slot.shape() {
            return Err(corrupt(format!(
                "tensor shape {dims:?} does not match model shape {:?}",
                slot.shape()
            )));
        }
        let len = r.u64()? as usize;
        if len != slot.len() {
            return Err(corrupt(format!("tensor length {len} != {}", slot.len())));
        }
        let raw = r.take(len.checked_mul(8).ok_or_else(|| corrupt("length overflow".into()))?)?;
        for (dst, chunk) in slot.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(params)
}

fn format_digest(d: u64) -> String {
    format!("{d:016x}")
}

impl CheckpointSet {
    pub(crate) fn create(
        dir: &Path,
        model_spec: ModelSpec,
        train_config: TrainConfig,
        label_shuffle: Option<String>,
    ) -> Self {
        Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                format_version: CHECKPOINT_FORMAT_VERSION,
                model_spec,
                train_config,
                entries: Vec::new(),
                label_shuffle,
            },
        }
    }

    /// Writes a snapshot file and appends its entry (manifest not yet flushed).
    pub(crate) fn store(&mut self, model: &Model, epoch: usize, eval: (f64, f64)) -> Result<()> {
        let bytes = encode_params(model.params());
        let name = format!("ckpt_{epoch}.bin");
        write_atomic(&self.dir.join(&name), &bytes)?;
        self.manifest.entries.push(CheckpointEntry {
            epoch,
            path: name,
            checksum: format_digest(fnv1a64(&bytes)),
            train_loss: Some(eval.0),
            train_error: Some(eval.1),
        });
        Ok(())
    }

    /// Writes externally produced snapshots (e.g. imported weights) as a
    /// checkpoint set. Epochs must be strictly increasing.
    pub fn from_snapshots(
        dir: &Path,
        model_spec: ModelSpec,
        train_config: TrainConfig,
        snapshots: &[(usize, Params)],
    ) -> Result<Self> {
        if snapshots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(VogError::validation("snapshot epochs must be strictly increasing"));
        }
        std::fs::create_dir_all(dir).map_err(|e| VogError::io(dir, e))?;
        let mut set = Self::create(dir, model_spec.clone(), train_config, None);
        for (epoch, params) in snapshots {
            let model = Model::new(model_spec.clone(), params.clone())?;
            let bytes = encode_params(model.params());
            let name = format!("ckpt_{epoch}.bin");
            write_atomic(&set.dir.join(&name), &bytes)?;
            set.manifest.entries.push(CheckpointEntry {
                epoch: *epoch,
                path: name,
                checksum: format_digest(fnv1a64(&bytes)),
                train_loss: None,
                train_error: None,
            });
        }
        set.write_manifest()?;
        Ok(set)
    }

    pub fn write_manifest(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest)?;
        write_atomic(&self.dir.join(MANIFEST_FILE), json.as_bytes())
    }

    /// Reads `dir/manifest.json` and checks its structural invariants.
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| VogError::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| VogError::Format {
            field: "manifest",
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_manifest(dir, manifest)
    }

    pub fn from_manifest(dir: &Path, manifest: Manifest) -> Result<Self> {
        if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(VogError::Format {
                field: "format_version",
                message: format!(
                    "manifest version {} unsupported (expected {CHECKPOINT_FORMAT_VERSION})",
                    manifest.format_version
                ),
            });
        }
        manifest.model_spec.layer_shapes()?;
        if manifest.entries.windows(2).any(|w| w[1].epoch <= w[0].epoch) {
            return Err(VogError::validation("manifest epochs must be strictly increasing"));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn model_spec(&self) -> &ModelSpec {
        &self.manifest.model_spec
    }

    pub fn entries(&self) -> &[CheckpointEntry] {
        &self.manifest.entries
    }

    pub fn epochs(&self) -> Vec<usize> {
        self.manifest.entries.iter().map(|e| e.epoch).collect()
    }

    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.entries.is_empty()
    }

    pub fn final_entry(&self) -> Result<&CheckpointEntry> {
        self.manifest
            .entries
            .last()
            .ok_or_else(|| VogError::validation("checkpoint set is empty"))
    }

    /// Loads one snapshot, verifying its digest against the manifest.
    pub fn load_params(&self, entry: &CheckpointEntry) -> Result<Params> {
        let path = self.dir.join(&entry.path);
        let bytes = std::fs::read(&path).map_err(|e| VogError::io(&path, e))?;
        let digest = format_digest(fnv1a64(&bytes));
        if digest != entry.checksum {
            return Err(VogError::Corruption {
                path,
                message: format!("checksum {digest} does not match manifest {}", entry.checksum),
            });
        }
        decode_params(&bytes, self.model_spec(), &path)
    }

    pub fn load_model(&self, entry: &CheckpointEntry) -> Result<Model> {
        Model::new(self.model_spec().clone(), self.load_params(entry)?)
    }

    pub fn final_model(&self) -> Result<Model> {
        self.load_model(self.final_entry()?)
    }

    /// The label shuffle record written during training, if any.
    pub fn label_shuffle(&self) -> Result<Option<super::LabelShuffleRecord>> {
        match &self.manifest.label_shuffle {
            None => Ok(None),
            Some(name) => super::LabelShuffleRecord::load(&self.dir.join(name)).map(Some),
        }
    }

    /// Restricts to a training stage. Early is the first three stored
    /// snapshots after epoch 0, late the last three, all is everything except
    /// epoch 0.
    pub fn select_stage(&self, stage: Stage) -> Result<CheckpointSet> {
        let trained: Vec<CheckpointEntry> = self
            .manifest
            .entries
            .iter()
            .filter(|e| e.epoch != 0)
            .cloned()
            .collect();
        let need = match stage {
            Stage::Early | Stage::Late => 3,
            Stage::All => 2,
        };
        if trained.len() < need {
            return Err(VogError::validation(format!(
                "VoG needs K >= 2 checkpoints; stage `{}` uses {need} or more after epoch 0, found {}",
                stage.as_str(),
                trained.len()
            )));
        }
        let entries = match stage {
            Stage::Early => trained[..3].to_vec(),
            Stage::Late => trained[trained.len() - 3..].to_vec(),
            Stage::All => trained,
        };
        Ok(CheckpointSet {
            dir: self.dir.clone(),
            manifest: Manifest {
                entries,
                ..self.manifest.clone()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_set(epochs: &[usize]) -> CheckpointSet {
        let spec = ModelSpec::mlp([1, 1, 2], &[3], 2);
        let mut set = CheckpointSet::create(
            Path::new("/nonexistent"),
            spec,
            TrainConfig::constant_lr(1, 1, 0.1, 0),
            None,
        );
        set.manifest.entries = epochs
            .iter()
            .map(|&epoch| CheckpointEntry {
                epoch,
                path: format!("ckpt_{epoch}.bin"),
                checksum: "0".into(),
                train_loss: None,
                train_error: None,
            })
            .collect();
        set
    }

    #[test]
    fn stage_selection() {
        let all: Vec<usize> = (0..=15).collect();
        let s = fake_set(&all);
        assert_eq!(s.select_stage(Stage::Early).unwrap().epochs(), vec![1, 2, 3]);
        assert_eq!(s.select_stage(Stage::Late).unwrap().epochs(), vec![13, 14, 15]);
        assert_eq!(fake_set(&[0, 2, 4]).select_stage(Stage::All).unwrap().epochs(), vec![2, 4]);
        let err = fake_set(&[0, 2, 4]).select_stage(Stage::Late).unwrap_err();
        assert!(err.to_string().contains("3 or more"));
        assert!(fake_set(&[0, 2]).select_stage(Stage::All).is_err());
    }

    #[test]
    fn encode_decode_is_exact() {
        let spec = ModelSpec::small_convnet([2, 5, 5], 2, 2, 4, 3);
        let params = Params::init(&spec, 17).unwrap();
        let bytes = encode_params(&params);
        let back = decode_params(&bytes, &spec, Path::new("mem")).unwrap();
        assert_eq!(back, params);
        assert_eq!(encode_params(&back), bytes);
    }

    #[test]
    fn decode_rejects_truncation_and_versions() {
        let spec = ModelSpec::mlp([1, 1, 2], &[3], 2);
        let bytes = encode_params(&Params::init(&spec, 1).unwrap());
        for cut in [0, 7, 12, 30, bytes.len() - 1] {
            assert!(decode_params(&bytes[..cut], &spec, Path::new("t")).is_err());
        }
        let mut bumped = bytes.clone();
        bumped[8] = 9;
        assert!(matches!(
            decode_params(&bumped, &spec, Path::new("t")),
            Err(VogError::Format { field: "format_version", .. })
        ));
        let other = ModelSpec::mlp([1, 1, 2], &[4], 2);
        assert!(matches!(
            decode_params(&bytes, &other, Path::new("t")),
            Err(VogError::Corruption { .. })
        ));
    }
}
