//! Small file helpers shared by the checkpoint store and report writers.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, VogError};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| VogError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| VogError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| VogError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| VogError::io(path, e))?;
    tmp.persist(path).map_err(|e| VogError::io(path, e.error))?;
    Ok(())
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Twelve significant digits in scientific notation, e.g. `1.22474487139e0`.
pub fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        // drop the sign of negative zero
        return "0.00000000000e0".to_string();
    }
    format!("{v:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn sig12_format() {
        assert_eq!(fmt_sig12(1.224744871391589), "1.22474487139e0");
        assert_eq!(fmt_sig12(-0.0), "0.00000000000e0");
        assert_eq!(fmt_sig12(0.00012345), "1.23450000000e-4");
    }
}
