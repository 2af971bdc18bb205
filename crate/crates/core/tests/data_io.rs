use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use vog::data::{gaussian_ood, load_idx, make_glyphs, write_idx, GlyphConfig, Split, OOD_LABEL};

fn be(v: u32) -> [u8; 4] {
    [(v >> 24) as u8, (v >> 16) as u8, (v >> 8) as u8, v as u8]
}

/// Hand-assembled IDX pair: four 28x28 images with a known pixel pattern
/// (`(7 * i + r + c) % 256` for image `i`), labels 0, 4, 1, 9.
fn write_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut img = Vec::new();
    for v in [2051, 4, 28, 28] {
        img.extend_from_slice(&be(v));
    }
    for i in 0..4usize {
        for r in 0..28usize {
            for c in 0..28usize {
                img.push(((7 * i + r + c) % 256) as u8);
            }
        }
    }
    let (ip, lp) = (dir.join("imgs.idx"), dir.join("lbls.idx"));
    std::fs::write(&ip, img).unwrap();
    std::fs::write(&lp, labels_file(&[0, 4, 1, 9])).unwrap();
    (ip, lp)
}

fn labels_file(labels: &[u8]) -> Vec<u8> {
    let mut lbl = be(2049).to_vec();
    lbl.extend_from_slice(&be(labels.len() as u32));
    lbl.extend_from_slice(labels);
    lbl
}

#[test]
fn loads_hand_written_idx_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = write_fixture(dir.path());
    let ds = load_idx(&ip, &lp, Split::Test).unwrap();
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.image_shape(), &[1, 28, 28]);
    assert_eq!(ds.labels(), vec![0, 4, 1, 9]);
    assert_eq!(ds.class_count, 10);
    assert_eq!(ds.split, Split::Test);
    for (i, e) in ds.examples.iter().enumerate() {
        for r in 0..28 {
            for c in 0..28 {
                let want = ((7 * i + r + c) % 256) as f64 / 255.0;
                assert_eq!(e.image.data()[r * 28 + c], want);
            }
        }
    }
}

#[test]
fn idx_errors_are_typed() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = write_fixture(dir.path());

    let missing = load_idx(&dir.path().join("nope"), &lp, Split::Train).unwrap_err();
    assert_eq!(missing.kind(), "not_found");

    std::fs::write(&lp, labels_file(&[0, 4, 1])).unwrap();
    let err = load_idx(&ip, &lp, Split::Train).unwrap_err();
    assert_eq!(err.kind(), "format_error");
    assert!(err.to_string().contains("`count`"), "{err}");

    let mut short = labels_file(&[0, 4, 1, 9]);
    short.pop();
    std::fs::write(&lp, &short).unwrap();
    let err = load_idx(&ip, &lp, Split::Train).unwrap_err();
    assert!(err.to_string().contains("`labels`"), "{err}");

    std::fs::write(&lp, [0u8, 0, 8, 3, 0, 0, 0, 2, 0, 1]).unwrap();
    let err = load_idx(&ip, &lp, Split::Train).unwrap_err();
    assert!(err.to_string().contains("`magic`"), "{err}");

    std::fs::write(&lp, labels_file(&[0, 4, 1, 9])).unwrap();
    let mut img = std::fs::read(&ip).unwrap();
    img.truncate(100);
    std::fs::write(&ip, img).unwrap();
    let err = load_idx(&ip, &lp, Split::Train).unwrap_err();
    assert!(err.to_string().contains("`pixels`"), "{err}");
}

#[test]
fn glyph_idx_round_trip_quantizes_to_one_byte() {
    let ds = make_glyphs(&GlyphConfig {
        n: 40,
        seed: 9,
        ..GlyphConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
    write_idx(&ds, &ip, &lp).unwrap();
    let back = load_idx(&ip, &lp, Split::Train).unwrap();
    assert_eq!(back.labels(), ds.labels());
    for (a, b) in ds.examples.iter().zip(&back.examples) {
        for (x, y) in a.image.data().iter().zip(b.image.data()) {
            assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
    // A second round trip is exact.
    write_idx(&back, &ip, &lp).unwrap();
    assert_eq!(load_idx(&ip, &lp, Split::Train).unwrap(), back);
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 20_000;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn gaussian_ood_matches_clipped_normal_moments() {
    // Y = clip(0.5 + Z, 0, 1): atoms at 0 and 1 plus the density on (0, 1).
    let atom = simpson(std_normal_pdf, -12.0, -0.5);
    let mean = simpson(|y| y * std_normal_pdf(y - 0.5), 0.0, 1.0) + atom;
    let second = simpson(|y| y * y * std_normal_pdf(y - 0.5), 0.0, 1.0) + atom;
    let var = second - mean * mean;

    let ds = gaussian_ood(10_000, &[1, 2, 2], 21).unwrap();
    assert_eq!(ds.split, Split::Ood);
    assert!(ds.examples.iter().all(|e| e.label == OOD_LABEL));
    let px: Vec<f64> = ds.examples.iter().flat_map(|e| e.image.data().to_vec()).collect();
    let n = px.len() as f64;
    let m = px.iter().sum::<f64>() / n;
    let v = px.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let zeros = px.iter().filter(|&&x| x == 0.0).count() as f64 / n;
    let ones = px.iter().filter(|&&x| x == 1.0).count() as f64 / n;

    let se_mean = (var / n).sqrt();
    let se_atom = (atom * (1.0 - atom) / n).sqrt();
    assert!((m - mean).abs() < 5.0 * se_mean, "mean {m} vs {mean}");
    assert!((v - var).abs() < 0.01, "var {v} vs {var}");
    assert!((zeros - atom).abs() < 5.0 * se_atom, "P(0) {zeros} vs {atom}");
    assert!((ones - atom).abs() < 5.0 * se_atom, "P(1) {ones} vs {atom}");

    assert_eq!(gaussian_ood(5, &[1, 2, 2], 21).unwrap().examples[0], ds.examples[0]);
    assert!(gaussian_ood(0, &[1, 2, 2], 0).is_err());
}

#[test]
fn million_pixels_agree_with_box_muller_oracle() {
    // Independent sampler: Box-Muller on a ChaCha20 stream.
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let n = 1_000_000;
    let mut oracle = 0.0;
    for _ in 0..n / 2 {
        let (u1, u2): (f64, f64) = (1.0 - rng.random::<f64>(), rng.random());
        let r = (-2.0 * u1.ln()).sqrt();
        for z in [r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin()] {
            oracle += (0.5 + z).clamp(0.0, 1.0);
        }
    }
    oracle /= n as f64;

    let ds = gaussian_ood(n / 4, &[1, 2, 2], 5).unwrap();
    let mean = ds.examples.iter().flat_map(|e| e.image.data().iter()).sum::<f64>() / n as f64;
    assert!((0.49..=0.51).contains(&mean), "{mean}");
    // Each mean has standard error ~4.3e-4.
    assert!((mean - oracle).abs() < 3e-3, "{mean} vs {oracle}");
}
