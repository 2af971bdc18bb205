use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LabeledDataset, Split, OOD_LABEL};
use crate::error::{Result, VogError};
use crate::tensor::Tensor;

pub const OOD_NOISE_MEAN: f64 = 0.5;
/// Interpreted as a standard deviation.
pub const OOD_NOISE_STD: f64 = 1.0;

/// `n` images whose pixels are i.i.d. `N(0.5, 1)` clipped to `[0, 1]`.
pub fn gaussian_ood(n: usize, image_shape: &[usize], seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(VogError::validation("gaussian_ood needs n >= 1"));
    }
    let numel: usize = image_shape.iter().product();
    let normal = Normal::new(OOD_NOISE_MEAN, OOD_NOISE_STD).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..n)
        .map(|_| {
            let px = (0..numel)
                .map(|_| normal.sample(&mut rng).clamp(0.0, 1.0))
                .collect();
            Tensor::new(image_shape.to_vec(), px)
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_parts(
        images,
        vec![OOD_LABEL; n],
        Split::Ood,
        0,
        format!(
            "gaussian_ood(mean={OOD_NOISE_MEAN}, std={OOD_NOISE_STD}, clipped=[0,1], seed={seed}, label=ood-sentinel)"
        ),
    )
}
