//! Binary field dumps.
//!
//! Layout (little-endian):
//!
//! | offset | size | content                      |
//! |--------|------|------------------------------|
//! | 0      | 8    | magic `FNLSFLD1`             |
//! | 8      | 4    | `u32` points per axis `n`    |
//! | 12     | 8    | `f64` half-width `L`         |
//! | 20     | 8    | `f64` spacing `h`            |
//! | 28     | 4    | reserved, zero               |
//! | 32     | 8n³  | `f64` values, z fastest      |

use std::path::Path;

use super::field::ScalarField;
use super::grid::Grid3D;
use crate::error::{FnlsError, Result};

pub const MAGIC: &[u8; 8] = b"FNLSFLD1";
pub const HEADER_LEN: usize = 32;

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.points() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&g.spacing().to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&bytes[at..at + 8]);
    f64::from_le_bytes(b)
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < HEADER_LEN {
        return Err(FnlsError::Decode(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(FnlsError::Decode("bad magic".into()));
    }
    let mut nb = [0u8; 4];
    nb.copy_from_slice(&bytes[8..12]);
    let n = u32::from_le_bytes(nb) as usize;
    let half_width = read_f64(bytes, 12);
    let spacing = read_f64(bytes, 20);
    if bytes[28..32] != [0u8; 4] {
        return Err(FnlsError::Decode("reserved header bytes are not zero".into()));
    }
    let grid = Grid3D::new(half_width, n).map_err(|e| FnlsError::Decode(e.to_string()))?;
    if grid.spacing().to_bits() != spacing.to_bits() {
        return Err(FnlsError::Decode(format!(
            "spacing {spacing} inconsistent with 2L/(n-1) = {}",
            grid.spacing()
        )));
    }
    let expected = HEADER_LEN as u64 + 8 * (grid.len() as u64);
    if bytes.len() as u64 != expected {
        return Err(FnlsError::Decode(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            let mut b = [0u8; 8];
            b.copy_from_slice(c);
            f64::from_le_bytes(b)
        })
        .collect();
    ScalarField::from_values(grid, values).map_err(|e| FnlsError::Decode(e.to_string()))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    std::fs::write(path, encode_field(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    decode_field(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScalarField {
        let g = Grid3D::new(3.0, 16).unwrap();
        ScalarField::from_fn(g, |x| x[0] - 0.5 * x[1] * x[2])
    }

    #[test]
    fn header_layout() {
        let bytes = encode_field(&sample());
        assert_eq!(&bytes[..8], b"FNLSFLD1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
        assert_eq!(read_f64(&bytes, 12), 3.0);
        assert_eq!(read_f64(&bytes, 20), 6.0 / 15.0);
        assert_eq!(bytes.len(), 32 + 8 * 4096);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let back = decode_field(&encode_field(&f)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_corruption() {
        let good = encode_field(&sample());
        assert!(decode_field(&good[..31]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
        let mut bad = good.clone();
        bad[20] ^= 1;
        assert!(decode_field(&bad).is_err());
        let mut bad = good.clone();
        bad[29] = 1;
        assert!(decode_field(&bad).is_err());
        let mut bad = good.clone();
        bad.pop();
        assert!(decode_field(&bad).is_err());
        let mut bad = good;
        bad[32..40].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_field(&bad).is_err());
    }
}
