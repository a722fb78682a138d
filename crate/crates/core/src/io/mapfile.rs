//! FTMAP1 binary map files.
//!
//! An ASCII header line `FTMAP1 <ntm> <npm> <nr>\n` followed by
//! `ntm · npm · nr` little-endian binary64 values in storage order: `j`
//! fastest, then `k`, then the realization `i`.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::field::MapField;

pub const MAP_MAGIC: &str = "FTMAP1";

// Longest header we accept: magic plus three 20-digit integers.
const MAX_HEADER_LEN: usize = 96;

#[derive(Debug, Error, PartialEq)]
pub enum MapFileError {
    #[error("not an FTMAP1 file (bad magic)")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("dimensions {ntm} x {npm} x {nr} overflow the addressable size")]
    DimensionOverflow { ntm: usize, npm: usize, nr: usize },
    #[error("truncated payload: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("payload has {extra} trailing bytes after {expected} values")]
    TrailingBytes { expected: usize, extra: usize },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn header(ntm: usize, npm: usize, nr: usize) -> String {
    format!("{MAP_MAGIC} {ntm} {npm} {nr}\n")
}

/// Serialize a field into FTMAP1 bytes.
pub fn encode_map(field: &MapField) -> Vec<u8> {
    let (ntm, npm, nr) = field.dims();
    let head = header(ntm, npm, nr);
    let mut out = Vec::with_capacity(head.len() + 8 * field.points());
    out.extend_from_slice(head.as_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parse FTMAP1 bytes, checking the header against the payload length.
pub fn decode_map(bytes: &[u8]) -> Result<MapField, MapFileError> {
    if !bytes.starts_with(MAP_MAGIC.as_bytes()) {
        return Err(MapFileError::BadMagic);
    }
    let nl = bytes
        .iter()
        .take(MAX_HEADER_LEN)
        .position(|&b| b == b'\n')
        .ok_or_else(|| MapFileError::BadHeader("no newline within the header limit".into()))?;
    let text = std::str::from_utf8(&bytes[..nl]).map_err(|_| MapFileError::BadHeader("not ASCII".into()))?;
    let mut parts = text.split(' ');
    if parts.next() != Some(MAP_MAGIC) {
        return Err(MapFileError::BadMagic);
    }
    let dims: Vec<usize> = parts
        .map(|p| p.parse::<usize>().map_err(|_| MapFileError::BadHeader(format!("bad dimension `{p}`"))))
        .collect::<Result<_, _>>()?;
    let [ntm, npm, nr] = dims[..] else {
        return Err(MapFileError::BadHeader(format!("expected 3 dimensions, found {}", dims.len())));
    };
    let expected = ntm
        .checked_mul(npm)
        .and_then(|n| n.checked_mul(nr))
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or(MapFileError::DimensionOverflow { ntm, npm, nr })?;
    let payload = &bytes[nl + 1..];
    let found = payload.len() / 8;
    if found < expected {
        return Err(MapFileError::Truncated { expected, found });
    }
    if payload.len() > expected * 8 {
        return Err(MapFileError::TrailingBytes {
            expected,
            extra: payload.len() - expected * 8,
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(MapField::from_vec(ntm, npm, nr, values).expect("length checked"))
}

pub fn write_map(path: &Path, field: &MapField) -> Result<(), MapFileError> {
    std::fs::write(path, encode_map(field)).map_err(|e| MapFileError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_map(path: &Path) -> Result<MapField, MapFileError> {
    let bytes = std::fs::read(path).map_err(|e| MapFileError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    decode_map(&bytes)
}
