//! FMAT container: `"FMAT"`, LE u32 version, LE u32 rows, LE u32 cols, then
//! `rows · cols` LE f32 values in row-major order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::features::FeatureMatrix;
use crate::error::{Error, Result};

pub const FMAT_MAGIC: &[u8; 4] = b"FMAT";
pub const FMAT_VERSION: u32 = 1;
pub const FMAT_HEADER_LEN: usize = 16;

const NORM_TOL: f64 = 1e-5;

pub fn write_fmat_to<W: Write>(matrix: &FeatureMatrix, mut w: W) -> Result<()> {
    if matrix.rows == 0 || matrix.cols == 0 {
        return Err(Error::InvalidInput("cannot write an empty feature matrix".into()));
    }
    if matrix.data.len() != matrix.rows * matrix.cols {
        return Err(Error::Shape("feature data length does not match rows x cols".into()));
    }
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidInput(format!("dimension {v} exceeds u32")));
    let mut buf = Vec::with_capacity(FMAT_HEADER_LEN + 4 * matrix.data.len());
    buf.extend_from_slice(FMAT_MAGIC);
    buf.extend_from_slice(&FMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&dim(matrix.rows)?.to_le_bytes());
    buf.extend_from_slice(&dim(matrix.cols)?.to_le_bytes());
    for v in &matrix.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::io("<fmat stream>", e))
}

pub fn write_fmat(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_fmat_to(matrix, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Decodes an FMAT byte buffer without touching row norms.
pub fn read_fmat(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < FMAT_HEADER_LEN {
        return Err(Error::Format(format!("FMAT header truncated ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != FMAT_MAGIC {
        return Err(Error::Format(format!("bad FMAT magic {:?}", String::from_utf8_lossy(&bytes[0..4]))));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice"));
    let version = word(4);
    if version != FMAT_VERSION {
        return Err(Error::Format(format!("unsupported FMAT version {version}")));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("FMAT dimensions overflow".into()))?;
    let payload = &bytes[FMAT_HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "FMAT payload truncated: {} of {expected} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Format(format!("FMAT has {} trailing bytes", payload.len() - expected)));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    FeatureMatrix::new(rows, cols, data)
}

/// Loads an FMAT file. Rows that are not unit-norm are renormalized with a
/// warning.
pub fn load_fmat(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut m = read_fmat(&bytes)?;
    let fixed = m.renormalize(NORM_TOL)?;
    if fixed > 0 {
        log::warn!("{}: renormalized {fixed} of {} feature rows", path.display(), m.rows);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(m: &FeatureMatrix) -> Vec<u8> {
        let mut out = Vec::new();
        write_fmat_to(m, &mut out).unwrap();
        out
    }

    #[test]
    fn small_round_trip_is_bitwise() {
        let m = FeatureMatrix::new(2, 3, vec![0.6, 0.8, 0.0, -1.0, 0.0, 0.0]).unwrap();
        let bytes = encode(&m);
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(&bytes[0..4], b"FMAT");
        assert_eq!(read_fmat(&bytes).unwrap(), m);
    }

    #[test]
    fn bad_magic_and_version() {
        let m = FeatureMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let mut bytes = encode(&m);
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_fmat(&bytes), Err(Error::Format(_))));
        let mut bytes = encode(&m);
        bytes[4] = 2;
        assert!(matches!(read_fmat(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload() {
        let m = FeatureMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bytes = encode(&m);
        assert!(matches!(read_fmat(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(read_fmat(&bytes[..10]), Err(Error::Format(_))));
    }

    #[test]
    fn empty_matrix_not_written() {
        let m = FeatureMatrix::new(0, 3, vec![]).unwrap();
        assert!(matches!(write_fmat_to(&m, Vec::new()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn load_renormalizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.fmat");
        write_fmat(&FeatureMatrix::new(1, 2, vec![3.0, 4.0]).unwrap(), &p).unwrap();
        let m = load_fmat(&p).unwrap();
        assert_eq!(m.data, vec![0.6, 0.8]);
    }
}
