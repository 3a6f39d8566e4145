//! Headerless comma-separated decimal reals, one row per line.

use std::fmt::Write as _;
use std::path::Path;

use super::FeatureMatrix;
use crate::bytes;
use crate::error::{Error, Result};

pub(crate) fn load_csv(path: &Path) -> Result<FeatureMatrix> {
    let buf = bytes::read_file(path)?;
    let text = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
        row: 0,
        msg: format!("invalid utf-8: {e}"),
    })?;
    parse_csv(text)
}

pub fn parse_csv(text: &str) -> Result<FeatureMatrix> {
    let mut data = Vec::new();
    let mut dims = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let mut count = 0;
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|e| Error::Parse {
                row: i,
                msg: format!("{field:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: count });
            }
            data.push(v);
            count += 1;
        }
        match dims {
            None => dims = Some(count),
            Some(d) if d != count => {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: d,
                    found: count,
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let dims = dims.ok_or_else(|| Error::Empty("csv has no rows".into()))?;
    FeatureMatrix::new(rows, dims, data)
}

/// Writes the matrix as CSV using shortest round-trip decimal formatting.
pub fn save_csv(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in m.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    bytes::write_file(path.as_ref(), out.as_bytes())
}
