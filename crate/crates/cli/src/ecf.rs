//! ECF: a minimal binary container for a point cloud.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "ECF1"
//! 4       4         count N, u32 little-endian
//! 8       4         dim n, u32 little-endian
//! 12      8·N·n     f64 little-endian, row-major
//! ```

use std::fs;
use std::path::Path;

use cloudprint::PointCloud;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"ECF1";
pub const HEADER_LEN: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum EcfError {
    #[error("file is {0} bytes, shorter than the 12-byte ECF header")]
    ShortHeader(usize),
    #[error("bad magic {0:?}: not an ECF1 file")]
    BadMagic([u8; 4]),
    #[error("truncated payload: header promises {expected} bytes of data, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes: header promises {expected} bytes of data, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("header declares {count} x {dim}, which is too large to address")]
    TooLarge { count: u32, dim: u32 },
    #[error("invalid cloud: {0}")]
    Invalid(String),
    #[error("cloud has {count} x {dim} entries; ECF stores 32-bit sizes")]
    Unrepresentable { count: usize, dim: usize },
}

pub fn encode(cloud: &PointCloud) -> Result<Vec<u8>, EcfError> {
    let (count, dim) = (cloud.count(), cloud.dim());
    let (Ok(c), Ok(d)) = (u32::try_from(count), u32::try_from(dim)) else {
        return Err(EcfError::Unrepresentable { count, dim });
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * cloud.as_slice().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&c.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for v in cloud.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<PointCloud, EcfError> {
    if bytes.len() < HEADER_LEN {
        return Err(EcfError::ShortHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(EcfError::BadMagic(magic));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let expected = (count as usize)
        .checked_mul(dim as usize)
        .and_then(|e| e.checked_mul(8))
        .ok_or(EcfError::TooLarge { count, dim })?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(EcfError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(EcfError::TrailingBytes {
            expected,
            found: payload.len(),
        });
    }
    let dim = dim as usize;
    let mut data = Vec::with_capacity(expected / 8);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let value = f64::from_le_bytes(chunk.try_into().unwrap());
        if !value.is_finite() {
            return Err(EcfError::NonFinite {
                row: i / dim,
                col: i % dim,
                value,
            });
        }
        data.push(value);
    }
    PointCloud::from_flat(count as usize, dim, data).map_err(|e| EcfError::Invalid(e.to_string()))
}

pub fn read(path: &Path) -> Result<PointCloud, crate::CliError> {
    let bytes = fs::read(path).map_err(|e| crate::CliError::io(path, e))?;
    decode(&bytes).map_err(|e| crate::CliError::Ecf {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn write(path: &Path, cloud: &PointCloud) -> Result<(), crate::CliError> {
    let bytes = encode(cloud).map_err(|e| crate::CliError::Ecf {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, bytes).map_err(|e| crate::CliError::io(path, e))
}
