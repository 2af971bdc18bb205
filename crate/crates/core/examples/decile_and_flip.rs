//! Test error per VoG decile for early and late checkpoints of one run.
//!
//! `cargo run --release --example decile_and_flip -- [seed]`

use vog::engine::{compute_vog, rank, LabelSource, VogOptions};
use vog::evaluation::{correctness_of, decile_error, stage_flip_from_tables};
use vog::experiments::GlyphExperiment;
use vog::training::Stage;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let dir = tempfile::tempdir()?;
    let run = GlyphExperiment::benchmark(seed).run(dir.path())?;
    let mut tables = Vec::new();
    for stage in [Stage::Early, Stage::Late] {
        let recs = compute_vog(&run.checkpoints, &run.test, VogOptions::new(LabelSource::Predicted, stage))?;
        let table = decile_error(&rank(&recs), &correctness_of(&recs))?;
        println!("{:<5} {:?}", stage.as_str(), table.errors().iter().map(|e| format!("{e:.1}")).collect::<Vec<_>>());
        tables.push(table);
    }
    let late = tables.pop().unwrap();
    let flip = stage_flip_from_tables(tables.pop().unwrap(), late);
    println!("early rho {:?} late rho {:?} flip {}", flip.early_rho, flip.late_rho, flip.flip_detected);
    Ok(())
}
