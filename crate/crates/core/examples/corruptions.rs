//! Generate glyphs, apply each corruption and write the results as IDX files.
//!
//! `cargo run --release --example corruptions -- [out_dir]`

use std::path::PathBuf;

use vog::data::{corrupt, load_idx, make_glyphs, write_idx, Corruption, GlyphConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corrupted".into()));
    std::fs::create_dir_all(&out)?;
    let base = make_glyphs(&GlyphConfig { n: 100, ..GlyphConfig::default() })?;
    let kinds = [
        ("translate", Corruption::Translate { dx: 3, dy: -2 }),
        ("rotate90", Corruption::Rotate90),
        ("noise", Corruption::Noise { std: 0.3 }),
        ("blur", Corruption::Blur { kernel: 5 }),
    ];
    for (name, kind) in kinds {
        let ds = corrupt(&base, kind, 7)?;
        let (ip, lp) = (out.join(format!("{name}-images.idx")), out.join(format!("{name}-labels.idx")));
        write_idx(&ds, &ip, &lp)?;
        let back = load_idx(&ip, &lp, ds.split)?;
        let mean = back.examples.iter().flat_map(|e| e.image.data()).sum::<f64>() / (back.len() * 784) as f64;
        println!("{name:<9} {} images, mean pixel {mean:.3}", back.len());
    }
    Ok(())
}
