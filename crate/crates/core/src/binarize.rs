//! Iterative quantization (ITQ) binary codes and Hamming-distance ranking.
//!
//! Fitting centers the data, projects onto the top principal directions and
//! then alternates between binarizing the rotated projection and solving the
//! orthogonal Procrustes problem for the rotation that best matches those
//! bits. Each half-step can only lower `‖B − V·R‖²`.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bytes::{self, Reader};
use crate::error::{Error, Result};
use crate::features::{hamming, BinaryCodeMatrix, FeatureMatrix};
use crate::retrieval::RankedList;
use crate::seed;

pub const DEFAULT_ITERS: usize = 50;

/// Eigenvalues at or below this fraction of the largest one count as
/// uninformative directions.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ItqModel {
    pub mean: Vec<f64>,
    /// `dims × bits` PCA basis, columns orthonormal.
    pub projection: DMatrix<f64>,
    /// `bits × bits` orthogonal rotation.
    pub rotation: DMatrix<f64>,
    pub iters: usize,
    pub seed: u64,
    /// Quantization loss before training and after each iteration. Empty for
    /// loaded models.
    pub loss_trace: Vec<f64>,
    /// Max-norm of `RᵀR − I` for the initial rotation and after each
    /// iteration. Empty for loaded models.
    pub orthogonality_trace: Vec<f64>,
}

impl ItqModel {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn bits(&self) -> usize {
        self.rotation.ncols()
    }
}

fn centered(x: &FeatureMatrix, mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows(), x.dims(), |i, j| f64::from(x.row(i)[j]) - mean[j])
}

fn sign(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

fn quantization_loss(v: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let z = v * r;
    (sign(&z) - z).norm_squared()
}

/// Largest absolute entry of `RᵀR − I`.
pub fn orthogonality_error(r: &DMatrix<f64>) -> f64 {
    let g = r.transpose() * r - DMatrix::identity(r.ncols(), r.ncols());
    g.amax()
}

/// Top-`bits` principal directions, descending eigenvalue, each column's
/// largest-magnitude entry made positive.
fn principal_directions(v: &DMatrix<f64>, bits: usize) -> Result<DMatrix<f64>> {
    let n = v.nrows() as f64;
    let cov = (v.transpose() * v) / n;
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[idx[0]].max(0.0);
    let usable = idx
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > top * RANK_TOL && eig.eigenvalues[i] > 0.0)
        .count();
    if usable < bits {
        return Err(Error::RankDeficient {
            requested: bits,
            usable,
        });
    }
    let mut p = DMatrix::zeros(v.ncols(), bits);
    for (col, &i) in idx[..bits].iter().enumerate() {
        let mut e = eig.eigenvectors.column(i).into_owned();
        let mut pivot = 0;
        for r in 1..e.len() {
            if e[r].abs() > e[pivot].abs() {
                pivot = r;
            }
        }
        if e[pivot] < 0.0 {
            e.neg_mut();
        }
        p.set_column(col, &e);
    }
    Ok(p)
}

/// Seeded Gaussian matrix orthogonalized by QR.
fn initial_rotation(bits: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed::derive(seed, seed::ITQ));
    let g = DMatrix::from_fn(bits, bits, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q()
}

/// Alternating minimization of `‖sign(V·R) − V·R‖²` starting at `rotation`.
/// Returns the final rotation with loss and orthogonality traces.
fn train_rotation(
    v: &DMatrix<f64>,
    mut rotation: DMatrix<f64>,
    iters: usize,
) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mut loss_trace = vec![quantization_loss(v, &rotation)];
    let mut orthogonality_trace = vec![orthogonality_error(&rotation)];
    let vt = v.transpose();
    for _ in 0..iters {
        let b = sign(&(v * &rotation));
        // orthogonal Procrustes: VᵀB = UΣWᵀ, R = UWᵀ
        let svd = (&vt * &b).svd(true, true);
        let (u, w_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        rotation = u * w_t;
        loss_trace.push(quantization_loss(v, &rotation));
        orthogonality_trace.push(orthogonality_error(&rotation));
    }
    (rotation, loss_trace, orthogonality_trace)
}

/// Fits an ITQ model producing `bits`-bit codes.
pub fn itq_fit(x: &FeatureMatrix, bits: usize, iters: usize, seed: u64) -> Result<ItqModel> {
    let d = x.dims();
    if bits == 0 || bits > d {
        return Err(Error::param(format!("bits must be in 1..={d}, got {bits}")));
    }
    if x.rows() < 2 {
        return Err(Error::param("ITQ needs at least two rows"));
    }
    let n = x.rows() as f64;
    let mut mean = vec![0.0f64; d];
    for row in x.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let centered = centered(x, &mean);
    let projection = principal_directions(&centered, bits)?;
    let v = &centered * &projection;

    let (rotation, loss_trace, orthogonality_trace) =
        train_rotation(&v, initial_rotation(bits, seed), iters);
    log::debug!(
        "itq: bits={bits} iters={iters} loss {:.6e} -> {:.6e}",
        loss_trace[0],
        loss_trace[loss_trace.len() - 1]
    );

    Ok(ItqModel {
        mean,
        projection,
        rotation,
        iters,
        seed,
        loss_trace,
        orthogonality_trace,
    })
}

/// Bit `b` of row `i` is set iff `((x_i − mean) · P · R)_b ≥ 0`.
pub fn itq_encode(model: &ItqModel, x: &FeatureMatrix) -> Result<BinaryCodeMatrix> {
    if x.dims() != model.dims() {
        return Err(Error::shape(format!(
            "features have {} dims, ITQ model has {}",
            x.dims(),
            model.dims()
        )));
    }
    let bits = model.bits();
    let w = &model.projection * &model.rotation;
    let words = BinaryCodeMatrix::words_for(bits);
    let data: Vec<u64> = (0..x.rows())
        .into_par_iter()
        .flat_map_iter(|i| {
            let y: Vec<f64> = x
                .row(i)
                .iter()
                .zip(&model.mean)
                .map(|(&v, m)| f64::from(v) - m)
                .collect();
            let mut row = vec![0u64; words];
            for b in 0..bits {
                let col = w.column(b);
                let z: f64 = y.iter().zip(col.iter()).map(|(a, c)| a * c).sum();
                if z >= 0.0 {
                    row[b / 64] |= 1 << (b % 64);
                }
            }
            row
        })
        .collect();
    BinaryCodeMatrix::new(x.rows(), bits, data)
}

/// Ranks gallery codes by Hamming distance to query row `qi`, ties by
/// ascending index. Distances are bit counts.
pub fn hamming_rank(
    queries: &BinaryCodeMatrix,
    qi: usize,
    gallery: &BinaryCodeMatrix,
) -> Result<RankedList> {
    if queries.bits() != gallery.bits() {
        return Err(Error::shape(format!(
            "query codes have {} bits, gallery codes {}",
            queries.bits(),
            gallery.bits()
        )));
    }
    let q = queries.row(qi);
    // counting sort over distances 0..=bits keeps index order within a bucket
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); gallery.bits() + 1];
    for i in 0..gallery.rows() {
        buckets[hamming(q, gallery.row(i)) as usize].push(i as u32);
    }
    let mut order = Vec::with_capacity(gallery.rows());
    let mut distances = Vec::with_capacity(gallery.rows());
    for (d, b) in buckets.into_iter().enumerate() {
        distances.extend(std::iter::repeat_n(d as f64, b.len()));
        order.extend(b);
    }
    Ok(RankedList {
        query_id: qi,
        order,
        distances: Some(distances),
    })
}

pub fn hamming_rank_all(
    queries: &BinaryCodeMatrix,
    gallery: &BinaryCodeMatrix,
) -> Result<Vec<RankedList>> {
    (0..queries.rows())
        .into_par_iter()
        .map(|qi| hamming_rank(queries, qi, gallery))
        .collect()
}

pub const CRIQ_MAGIC: &[u8; 4] = b"CRIQ";
const CRIQ_VERSION: u8 = 1;

/// Serializes an ITQ model.
///
/// ```text
/// "CRIQ" | version u8 | D u32 | B u32 | iters u32 | seed u64
/// mean D×f64 | projection D×B f64 | rotation B×B f64   (row-major, LE)
/// ```
pub fn encode_itq(model: &ItqModel) -> Result<Vec<u8>> {
    let to_u32 =
        |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::param(format!("{what} exceeds u32")));
    let mut out = Vec::new();
    out.extend_from_slice(CRIQ_MAGIC);
    out.push(CRIQ_VERSION);
    out.extend_from_slice(&to_u32(model.dims(), "D")?.to_le_bytes());
    out.extend_from_slice(&to_u32(model.bits(), "B")?.to_le_bytes());
    out.extend_from_slice(&to_u32(model.iters, "iters")?.to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    bytes::put_f64s(&mut out, &model.mean);
    bytes::put_row_major(&mut out, &model.projection);
    bytes::put_row_major(&mut out, &model.rotation);
    Ok(out)
}

pub fn decode_itq(buf: &[u8]) -> Result<ItqModel> {
    let mut r = Reader::new(buf);
    r.magic(CRIQ_MAGIC)?;
    let version = r.u8()?;
    if version != CRIQ_VERSION {
        return Err(Error::BadVersion(version));
    }
    let d = r.u32()? as usize;
    let b = r.u32()? as usize;
    let iters = r.u32()? as usize;
    let seed = r.u64()?;
    if b == 0 || b > d {
        return Err(Error::param(format!("invalid bit count {b} for {d} dims")));
    }
    let mean = r.f64s(d)?;
    let projection = DMatrix::from_row_slice(d, b, &r.f64s(d * b)?);
    let rotation = DMatrix::from_row_slice(b, b, &r.f64s(b * b)?);
    r.finish()?;
    let finite = mean
        .iter()
        .chain(projection.iter())
        .chain(rotation.iter())
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::param("ITQ model contains non-finite values"));
    }
    Ok(ItqModel {
        mean,
        projection,
        rotation,
        iters,
        seed,
        loss_trace: Vec::new(),
        orthogonality_trace: Vec::new(),
    })
}

pub fn save_itq(model: &ItqModel, path: impl AsRef<Path>) -> Result<()> {
    bytes::write_file(path.as_ref(), &encode_itq(model)?)
}

pub fn load_itq(path: impl AsRef<Path>) -> Result<ItqModel> {
    decode_itq(&bytes::read_file(path.as_ref())?)
}
