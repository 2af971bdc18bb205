//! Compare the analytic input gradient of a logit with central differences.
//!
//! `cargo run --release --example gradient_check`

use vog::nn::{Model, ModelSpec};
use vog::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ModelSpec::small_convnet([1, 8, 8], 3, 3, 12, 4);
    let model = Model::init(spec, 3)?;
    let x = Tensor::new(vec![1, 8, 8], (0..64).map(|i| ((i * 37) % 64) as f64 / 64.0).collect())?;
    let eps = 1e-5;
    for p in 0..4 {
        let g = model.input_gradient(&x, p)?;
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi.data_mut()[i] += eps;
            lo.data_mut()[i] -= eps;
            let fd = (model.forward(&hi)?.data()[p] - model.forward(&lo)?.data()[p]) / (2.0 * eps);
            let a = g.data()[i];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
        }
        println!("logit {p}: max relative error {worst:.2e}");
    }
    Ok(())
}
