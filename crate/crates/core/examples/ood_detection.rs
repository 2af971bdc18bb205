//! VoG and max-softmax detection of Gaussian noise images.
//!
//! `cargo run --release --example ood_detection -- [seed]`

use vog::data::gaussian_ood;
use vog::experiments::{ood_experiment, GlyphExperiment};
use vog::training::Stage;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let dir = tempfile::tempdir()?;
    let run = GlyphExperiment::benchmark(seed).run(dir.path())?;
    let ood = gaussian_ood(2000, run.test.image_shape(), 0)?;
    let out = ood_experiment(&run.checkpoints, &run.test, &ood, Stage::Late, 1)?;
    for (name, m) in [("vog", &out.report.vog), ("msp", &out.report.msp)] {
        println!("{name}: auroc {:.3} aupr-in {:.3} aupr-out {:.3}", m.auroc, m.aupr_in, m.aupr_out);
    }
    for q in &out.report.quartiles {
        println!("quartile {}: ood share {:.3}", q.quartile, q.fraction_of_ood);
    }
    Ok(())
}
