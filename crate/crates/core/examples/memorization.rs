//! Shuffled-label memorization test on a reduced glyph run.
//!
//! `cargo run --release --example memorization -- [train_size]`

use vog::experiments::{memorization_report, GlyphExperiment};
use vog::training::Stage;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut exp = GlyphExperiment::memorization(0);
    exp.train_data.n = n;
    let dir = tempfile::tempdir()?;
    let run = exp.run(dir.path())?;
    for stage in [Stage::Early, Stage::Late, Stage::All] {
        let r = memorization_report(&run.checkpoints, &run.train, stage, 0.05, 1)?;
        println!(
            "{:<5} train error {:.3}  clean {:+.3}  shuffled {:+.3}  t {:.2}  p {:.2e}",
            stage.as_str(),
            r.final_train_error,
            r.welch.mean1,
            r.welch.mean2,
            r.welch.t_statistic,
            r.welch.p_value
        );
    }
    Ok(())
}
