//! Flat binary tensor files.
//!
//! Layout: the magic string `SELDTNSR`, the dimension count and each
//! dimension as little-endian u32, then row-major little-endian f32 values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const TENSOR_MAGIC: &[u8; 8] = b"SELDTNSR";

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("tensor io failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a tensor file (bad magic)")]
    BadMagic,
    #[error("dimension/value count mismatch")]
    ShapeMismatch,
    #[error("tensor too large to describe with u32 dimensions")]
    TooLarge,
}

/// Write a row-major tensor.
pub fn write_tensor(path: &Path, dims: &[usize], values: &[f32]) -> Result<(), TensorFileError> {
    let expected: usize = dims.iter().product();
    if expected != values.len() {
        return Err(TensorFileError::ShapeMismatch);
    }
    if dims.iter().any(|&d| d > u32::MAX as usize) || dims.len() > u32::MAX as usize {
        return Err(TensorFileError::TooLarge);
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a tensor written by [`write_tensor`].
pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f32>), TensorFileError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(TensorFileError::BadMagic);
    }
    let mut u32_buf = [0u8; 4];
    r.read_exact(&mut u32_buf)?;
    let ndim = u32::from_le_bytes(u32_buf) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        r.read_exact(&mut u32_buf)?;
        dims.push(u32::from_le_bytes(u32_buf) as usize);
    }
    let count: usize = dims.iter().product();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut u32_buf)?;
        values.push(f32::from_le_bytes(u32_buf));
    }
    // Trailing bytes mean a malformed writer.
    if r.read(&mut u32_buf)? != 0 {
        return Err(TensorFileError::ShapeMismatch);
    }
    Ok((dims, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tnsr");
        let dims = [2usize, 3, 4];
        let values: Vec<f32> = (0..24).map(|i| i as f32 * 0.5 - 3.0).collect();
        write_tensor(&path, &dims, &values).unwrap();
        let (got_dims, got_values) = read_tensor(&path).unwrap();
        assert_eq!(got_dims, dims);
        assert_eq!(got_values, values);
    }

    #[test]
    fn header_layout_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tnsr");
        write_tensor(&path, &[1, 2], &[1.5, -2.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"SELDTNSR");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.5f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tnsr");
        std::fs::write(&path, b"NOTATNSRxxxx").unwrap();
        assert!(matches!(
            read_tensor(&path).unwrap_err(),
            TensorFileError::BadMagic
        ));
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tnsr");
        assert!(matches!(
            write_tensor(&path, &[2, 2], &[0.0; 3]).unwrap_err(),
            TensorFileError::ShapeMismatch
        ));
    }
}
