//! Raw dense matrix format: the 8-byte magic `GSPLTMAT`, `m` and `n` as
//! little-endian `u32`, then `m * n` little-endian `f64` values in row-major
//! order.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GSPLTMAT";
pub const HEADER_LEN: usize = 16;

pub fn read_binary_matrix<R: Read>(mut r: R, name: &str) -> Result<DMatrix<f64>> {
    let err = |message: String| Error::Parse {
        source_name: name.to_string(),
        message,
    };
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| err("file shorter than the 16-byte header".into()))?;
    if &header[..8] != MAGIC {
        return Err(err("bad magic, expected GSPLTMAT".into()));
    }
    let m = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let count = m
        .checked_mul(n)
        .ok_or_else(|| err(format!("size {m} x {n} overflows")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(err(format!(
            "expected {} data bytes for {m} x {n}, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(err(format!("non-finite value at entry ({}, {})", k / n.max(1), k % n.max(1))));
    }
    Ok(DMatrix::from_row_slice(m, n, &data))
}

pub fn write_binary_matrix<W: Write>(mut w: W, a: &DMatrix<f64>) -> Result<()> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("dimension {v} exceeds u32")))
    };
    w.write_all(MAGIC)?;
    w.write_all(&dim(a.nrows())?.to_le_bytes())?;
    w.write_all(&dim(a.ncols())?.to_le_bytes())?;
    for i in 0..a.nrows() {
        for v in a.row(i).iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
