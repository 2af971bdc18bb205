use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Result, VogError};
use crate::io::write_atomic;

/// Which examples had their label redrawn, and to what.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelShuffleRecord {
    pub fraction: f64,
    pub seed: u64,
    /// Sorted ascending.
    pub shuffled_indices: Vec<usize>,
    pub original_labels: BTreeMap<usize, usize>,
    pub new_labels: BTreeMap<usize, usize>,
}

impl LabelShuffleRecord {
    pub fn is_shuffled(&self, id: usize) -> bool {
        self.shuffled_indices.binary_search(&id).is_ok()
    }

    /// Re-applies the recorded labels to a copy of the original dataset.
    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        let mut out = data.clone();
        for (&id, &label) in &self.new_labels {
            let e = out
                .examples
                .get_mut(id)
                .ok_or_else(|| VogError::validation(format!("shuffled id {id} not in dataset")))?;
            if self.original_labels.get(&id) != Some(&e.label) {
                return Err(VogError::validation(format!(
                    "example {id} does not carry the recorded original label"
                )));
            }
            e.label = label;
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VogError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Picks `round(fraction * n)` examples without replacement and gives each a
/// label drawn uniformly from all `num_classes` classes (which may equal the
/// original one).
pub fn shuffle_labels(
    data: &LabeledDataset,
    fraction: f64,
    num_classes: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabelShuffleRecord)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(VogError::validation(format!(
            "shuffle fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if num_classes < 2 {
        return Err(VogError::validation("label shuffling needs at least 2 classes"));
    }
    let n = data.len();
    let count = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled_indices = rand::seq::index::sample(&mut rng, n, count).into_vec();
    shuffled_indices.sort_unstable();

    let mut out = data.clone();
    let mut original_labels = BTreeMap::new();
    let mut new_labels = BTreeMap::new();
    for &i in &shuffled_indices {
        let label = rng.random_range(0..num_classes);
        original_labels.insert(i, out.examples[i].label);
        new_labels.insert(i, label);
        out.examples[i].label = label;
    }
    out.provenance = format!("{} | shuffle_labels(fraction={fraction}, seed={seed})", data.provenance);
    Ok((
        out,
        LabelShuffleRecord {
            fraction,
            seed,
            shuffled_indices,
            original_labels,
            new_labels,
        },
    ))
}
