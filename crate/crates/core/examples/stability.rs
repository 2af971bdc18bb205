//! Rank agreement of VoG between two independently trained networks.
//!
//! `cargo run --release --example stability -- [seed_a] [seed_b]`

use vog::engine::{compute_vog, LabelSource, VogOptions};
use vog::evaluation::stability;
use vog::experiments::GlyphExperiment;
use vog::training::Stage;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).filter_map(|s| s.parse::<u64>().ok());
    let (a, b) = (args.next().unwrap_or(0), args.next().unwrap_or(1));
    let dir = tempfile::tempdir()?;
    let runs = [a, b]
        .iter()
        .map(|&s| GlyphExperiment::benchmark(s).run(&dir.path().join(s.to_string())))
        .collect::<vog::Result<Vec<_>>>()?;
    for stage in [Stage::Late, Stage::All] {
        let opts = VogOptions::new(LabelSource::Predicted, stage);
        let ra = compute_vog(&runs[0].checkpoints, &runs[0].test, opts)?;
        let rb = compute_vog(&runs[1].checkpoints, &runs[1].test, opts)?;
        let s = stability(&ra, &rb)?;
        println!(
            "{:<5} spearman {:.3} (p {:.1e}) max decile spread {:.1} pp",
            stage.as_str(),
            s.spearman_rho,
            s.spearman_p,
            s.max_decile_spread
        );
    }
    Ok(())
}
