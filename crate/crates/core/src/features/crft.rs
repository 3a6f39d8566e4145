//! CRFT container.
//!
//! ```text
//! 0..4    "CRFT"
//! 4       version (1)
//! 5       dtype (1 = f32, 2 = packed bits)
//! 6..8    reserved, zero
//! 8..12   dims (u32 LE); bit count for dtype 2
//! 12..20  rows (u64 LE)
//! 20..    payload, row-major, little-endian
//! ```
//!
//! dtype 2 payload rows are `ceil(bits / 64)` u64 words, LSB-first.

use std::path::Path;

use super::{BinaryCodeMatrix, FeatureMatrix};
use crate::bytes::{self, Reader};
use crate::error::{Error, Result};

pub const CRFT_MAGIC: &[u8; 4] = b"CRFT";
pub const CRFT_HEADER_LEN: usize = 20;
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 1;
const DTYPE_BITS: u8 = 2;

fn header(dtype: u8, dims: usize, rows: usize) -> Result<Vec<u8>> {
    let dims = u32::try_from(dims).map_err(|_| Error::param("dims exceed u32"))?;
    let mut out = Vec::with_capacity(CRFT_HEADER_LEN);
    out.extend_from_slice(CRFT_MAGIC);
    out.push(VERSION);
    out.push(dtype);
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&dims.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    Ok(out)
}

fn read_header(r: &mut Reader<'_>, want: u8) -> Result<(usize, usize)> {
    r.magic(CRFT_MAGIC)?;
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let dtype = r.u8()?;
    if dtype != want {
        return Err(Error::BadDtype(dtype));
    }
    r.take(2)?;
    let dims = r.u32()? as usize;
    let rows = usize::try_from(r.u64()?).map_err(|_| Error::param("row count exceeds usize"))?;
    Ok((dims, rows))
}

/// Declared payload must match the bytes present exactly.
fn check_payload(r: &Reader<'_>, expected: Option<usize>) -> Result<usize> {
    let found = r.remaining();
    let expected = expected.ok_or_else(|| Error::param("declared size overflows"))?;
    if found < expected {
        return Err(Error::Truncated {
            expected: (CRFT_HEADER_LEN + expected) as u64,
            found: (CRFT_HEADER_LEN + found) as u64,
        });
    }
    if found > expected {
        return Err(Error::TrailingData {
            expected: (CRFT_HEADER_LEN + expected) as u64,
            found: (CRFT_HEADER_LEN + found) as u64,
        });
    }
    Ok(expected)
}

pub(crate) fn encode_features(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut out = header(DTYPE_F32, m.dims(), m.rows())?;
    bytes::put_f32s(&mut out, m.as_slice());
    Ok(out)
}

pub(crate) fn decode_features(buf: &[u8]) -> Result<FeatureMatrix> {
    let mut r = Reader::new(buf);
    let (dims, rows) = read_header(&mut r, DTYPE_F32)?;
    let n = rows.checked_mul(dims);
    check_payload(&r, n.and_then(|n| n.checked_mul(4)))?;
    let data = r.f32s(n.unwrap())?;
    FeatureMatrix::new(rows, dims, data)
}

pub(crate) fn encode_codes(m: &BinaryCodeMatrix) -> Result<Vec<u8>> {
    let mut out = header(DTYPE_BITS, m.bits(), m.rows())?;
    out.reserve(m.as_words().len() * 8);
    for w in m.as_words() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub(crate) fn decode_codes(buf: &[u8]) -> Result<BinaryCodeMatrix> {
    let mut r = Reader::new(buf);
    let (bits, rows) = read_header(&mut r, DTYPE_BITS)?;
    let words = rows.checked_mul(BinaryCodeMatrix::words_for(bits));
    check_payload(&r, words.and_then(|w| w.checked_mul(8)))?;
    let data = (0..words.unwrap())
        .map(|_| r.u64())
        .collect::<Result<Vec<_>>>()?;
    BinaryCodeMatrix::new(rows, bits, data)
}

pub fn save_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    bytes::write_file(path.as_ref(), &encode_features(m)?)
}

pub(crate) fn load_features(path: &Path) -> Result<FeatureMatrix> {
    decode_features(&bytes::read_file(path)?)
}

/// Loads a CRFT file regardless of dtype.
pub fn load_crft(path: impl AsRef<Path>) -> Result<Crft> {
    let buf = bytes::read_file(path.as_ref())?;
    match buf.get(5) {
        Some(&DTYPE_BITS) => decode_codes(&buf).map(Crft::Codes),
        _ => decode_features(&buf).map(Crft::Features),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Crft {
    Features(FeatureMatrix),
    Codes(BinaryCodeMatrix),
}

pub fn save_codes(m: &BinaryCodeMatrix, path: impl AsRef<Path>) -> Result<()> {
    bytes::write_file(path.as_ref(), &encode_codes(m)?)
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<BinaryCodeMatrix> {
    decode_codes(&bytes::read_file(path.as_ref())?)
}
