//! Feature matrices, label lists and packed binary codes, plus their on-disk
//! formats.

mod binary;
mod crft;
mod csv;
mod labels;

use std::path::Path;

pub use binary::{hamming, BinaryCodeMatrix};
pub use crft::{
    load_codes, load_crft, save_codes, save_features, Crft, CRFT_HEADER_LEN, CRFT_MAGIC,
};
pub use labels::{load_labels, save_labels, LabelList};

use crate::error::{Error, Result};

/// Dense `rows × dims` matrix of `f32` values stored row-major.
///
/// Values are always finite. Distance math accumulates in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dims: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dims: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows
            .checked_mul(dims)
            .ok_or_else(|| Error::shape("rows × dims overflows"))?;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "data length {} != {rows} × {dims}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dims.max(1),
                col: pos % dims.max(1),
            });
        }
        Ok(FeatureMatrix { rows, dims, data })
    }

    pub fn zeros(rows: usize, dims: usize) -> Self {
        FeatureMatrix {
            rows,
            dims,
            data: vec![0.0; rows * dims],
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dims);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dims {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: dims,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        FeatureMatrix::new(rows.len(), dims, data)
    }

    /// Callers guarantee the length and finiteness invariants.
    pub(crate) fn from_raw(rows: usize, dims: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), rows * dims);
        FeatureMatrix { rows, dims, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Gathers the given columns (in the given order) into a new matrix.
    pub fn gather_columns(&self, cols: &[u32]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for row in self.iter_rows() {
            data.extend(cols.iter().map(|&c| row[c as usize]));
        }
        FeatureMatrix::from_raw(self.rows, cols.len(), data)
    }

    /// Selects rows by index.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dims);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix::from_raw(idx.len(), self.dims, data)
    }

    /// Multiplies every value by `factor`. Errors if the result overflows.
    pub fn scaled(&self, factor: f32) -> Result<FeatureMatrix> {
        FeatureMatrix::new(
            self.rows,
            self.dims,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Squared Euclidean distance with `f64` accumulation in index order.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = f64::from(*x) - f64::from(*y);
        acc += d * d;
    }
    acc
}

/// Loads a feature matrix from a CRFT or CSV file.
pub fn load_features(path: impl AsRef<Path>, format: FeatureFormat) -> Result<FeatureMatrix> {
    match format {
        FeatureFormat::Crft => crft::load_features(path.as_ref()),
        FeatureFormat::Csv => csv::load_csv(path.as_ref()),
    }
}

pub use csv::{parse_csv, save_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Crft,
    Csv,
}

impl FeatureFormat {
    /// Picks CSV for `.csv` files and CRFT otherwise.
    pub fn from_path(path: &Path) -> FeatureFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Crft,
        }
    }
}

/// Rows that had zero norm during [`l2_normalize`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeReport {
    pub zero_rows: Vec<usize>,
}

impl NormalizeReport {
    pub fn has_warning(&self) -> bool {
        !self.zero_rows.is_empty()
    }
}

/// Scales every row to unit Euclidean norm. Zero rows stay zero and are
/// reported.
///
/// Rows whose norm already rounds to one are left untouched, which makes the
/// operation idempotent bit-for-bit.
pub fn l2_normalize(m: &FeatureMatrix) -> (FeatureMatrix, NormalizeReport) {
    // an f32-rounded unit vector has norm within 2^-24 relative of 1
    const UNIT_TOL: f64 = 1.0 / (1u64 << 23) as f64;
    let mut out = m.data.clone();
    let mut report = NormalizeReport::default();
    for i in 0..m.rows {
        let row = &mut out[i * m.dims..(i + 1) * m.dims];
        let norm = row
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            report.zero_rows.push(i);
            continue;
        }
        if (norm - 1.0).abs() <= UNIT_TOL {
            continue;
        }
        for v in row.iter_mut() {
            *v = (f64::from(*v) / norm) as f32;
        }
    }
    if report.has_warning() {
        log::warn!(
            "l2_normalize: {} zero row(s) left unnormalized",
            report.zero_rows.len()
        );
    }
    (FeatureMatrix::from_raw(m.rows, m.dims, out), report)
}
