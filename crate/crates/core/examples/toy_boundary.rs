//! Two-cluster toy: train a 10-unit MLP, score the test points and relate
//! normalized VoG to distance from the learned decision boundary.
//!
//! `cargo run --release --example toy_boundary -- [seed]`

use vog::experiments::{run_toy, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let dir = tempfile::tempdir()?;
    let out = run_toy(&ToyConfig::new(seed), dir.path(), 1)?;
    let r = &out.report;
    println!("train error {:.3}, test error {:.3}", r.train_error, r.test_error);
    match &r.correlation {
        Some(c) => println!(
            "spearman(VoG, distance) {:.3} (p {:.2e}), pearson {:.3}",
            c.spearman_rho, c.spearman_p, c.pearson_r
        ),
        None => println!("correlation undefined: {}", r.undefined_reason.as_deref().unwrap_or("?")),
    }
    let mut pairs: Vec<_> = out.records.iter().zip(&out.distances).collect();
    pairs.sort_by(|a, b| b.0.normalized_vog.total_cmp(&a.0.normalized_vog));
    println!("highest VoG points:");
    for (rec, d) in pairs.iter().take(5) {
        println!("  #{:<4} vog {:+.3} distance {:.3}", rec.example_id, rec.normalized_vog, d);
    }
    Ok(())
}
