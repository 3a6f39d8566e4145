//! Random-subspace product quantization of gallery features.
//!
//! Channels are shuffled with a seeded permutation and cut into `m` equal
//! blocks; each block gets its own K-Means codebook. Optional extra blocks
//! are cut from further independent permutations. A row is encoded as one
//! centroid id per block and reconstructed by writing each centroid back to
//! its original channels (averaging channels that several blocks cover).

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::bytes::{self, Reader};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kmeans::{kmeans_fit, KMeansModel, KMeansParams};
use crate::seed;

/// Which original channels each subspace reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceLayout {
    dims: usize,
    m: usize,
    channel_index: Vec<Vec<u32>>,
    seed: u64,
}

impl SubspaceLayout {
    /// Builds a layout from explicit blocks, validating every invariant.
    pub fn from_blocks(dims: usize, m: usize, blocks: Vec<Vec<u32>>, seed: u64) -> Result<Self> {
        if m == 0 || blocks.len() < m {
            return Err(Error::param(format!(
                "layout needs at least m = {m} >= 1 blocks, got {}",
                blocks.len()
            )));
        }
        let width = blocks[0].len();
        if width == 0 || width * m != dims {
            return Err(Error::param(format!(
                "block width {width} × m {m} != dims {dims}"
            )));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.len() != width {
                return Err(Error::param(format!("block {j} has width {}", b.len())));
            }
            let mut seen = vec![false; dims];
            for &c in b {
                let c = c as usize;
                if c >= dims || seen[c] {
                    return Err(Error::param(format!(
                        "block {j}: channel {c} out of range or repeated"
                    )));
                }
                seen[c] = true;
            }
        }
        let mut covered = vec![false; dims];
        for &c in blocks[..m].iter().flatten() {
            if covered[c as usize] {
                return Err(Error::param(
                    "first m blocks must partition the channels".to_string(),
                ));
            }
            covered[c as usize] = true;
        }
        Ok(SubspaceLayout {
            dims,
            m,
            channel_index: blocks,
            seed,
        })
    }

    /// A single block holding channels in natural order.
    pub fn identity(dims: usize) -> Self {
        SubspaceLayout {
            dims,
            m: 1,
            channel_index: vec![(0..dims as u32).collect()],
            seed: 0,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn subspace_count(&self) -> usize {
        self.channel_index.len()
    }

    pub fn subspace_dim(&self) -> usize {
        self.dims / self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True when the blocks partition the channels (no extra subspaces).
    pub fn is_partition(&self) -> bool {
        self.channel_index.len() == self.m
    }

    pub fn block(&self, j: usize) -> &[u32] {
        &self.channel_index[j]
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.channel_index
    }
}

/// Cuts `m + extra` blocks of `d / m` channels from a stream of seeded
/// random permutations of `0..d`. The first `m` blocks come from the first
/// permutation and therefore partition the channels.
pub fn make_layout(d: usize, m: usize, seed: u64, extra: usize) -> Result<SubspaceLayout> {
    if m == 0 {
        return Err(Error::param("m must be at least 1"));
    }
    if d == 0 || d % m != 0 {
        return Err(Error::param(format!(
            "feature dimension {d} is not divisible by m = {m}"
        )));
    }
    let width = d / m;
    let mut rng = seed::rng(seed::derive(seed, seed::LAYOUT));
    let mut perm: Vec<u32> = (0..d as u32).collect();
    let mut cursor = d;
    let mut blocks = Vec::with_capacity(m + extra);
    for _ in 0..m + extra {
        if cursor == d {
            perm.sort_unstable();
            perm.shuffle(&mut rng);
            cursor = 0;
        }
        blocks.push(perm[cursor..cursor + width].to_vec());
        cursor += width;
    }
    SubspaceLayout::from_blocks(d, m, blocks, seed)
}

/// Per-subspace centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub layout: SubspaceLayout,
    k: usize,
    /// One `k × subspace_dim` matrix per subspace.
    centroids: Vec<FeatureMatrix>,
    seed: u64,
}

impl Codebook {
    pub fn new(layout: SubspaceLayout, centroids: Vec<FeatureMatrix>, seed: u64) -> Result<Self> {
        if centroids.len() != layout.subspace_count() {
            return Err(Error::shape(format!(
                "{} centroid blocks for {} subspaces",
                centroids.len(),
                layout.subspace_count()
            )));
        }
        let k = centroids[0].rows();
        if k == 0 {
            return Err(Error::param("codebook needs at least one centroid"));
        }
        for c in &centroids {
            if c.rows() != k || c.dims() != layout.subspace_dim() {
                return Err(Error::shape(format!(
                    "centroid block is {}×{}, expected {k}×{}",
                    c.rows(),
                    c.dims(),
                    layout.subspace_dim()
                )));
            }
        }
        Ok(Codebook {
            layout,
            k,
            centroids,
            seed,
        })
    }

    /// Stores a full-space clustering as a one-block codebook with identity
    /// layout.
    pub fn from_kmeans(model: &KMeansModel) -> Self {
        Codebook {
            layout: SubspaceLayout::identity(model.dims()),
            k: model.k(),
            centroids: vec![model.centroids.clone()],
            seed: model.seed,
        }
    }

    /// Inverse of [`Codebook::from_kmeans`]; requires an identity layout.
    pub fn to_kmeans(&self) -> Result<KMeansModel> {
        let identity = self.layout.subspace_count() == 1
            && self.layout.block(0).iter().enumerate().all(|(i, &c)| c as usize == i);
        if !identity {
            return Err(Error::param(
                "codebook is not a full-space clustering (layout is not identity)",
            ));
        }
        Ok(KMeansModel::from_centroids(self.centroids[0].clone(), self.seed))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn subspace_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self, subspace: usize) -> &FeatureMatrix {
        &self.centroids[subspace]
    }

    fn check_dims(&self, dims: usize) -> Result<()> {
        if dims != self.layout.dims() {
            return Err(Error::shape(format!(
                "features have {dims} dims, codebook expects {}",
                self.layout.dims()
            )));
        }
        Ok(())
    }
}

/// Runs K-Means independently in every subspace.
///
/// `params.seed` is the codebook seed; subspace `j` uses
/// `derive(derive(seed, CODEBOOK), j)`.
pub fn fit_codebook(
    x: &FeatureMatrix,
    layout: &SubspaceLayout,
    params: &KMeansParams,
) -> Result<Codebook> {
    if x.dims() != layout.dims() {
        return Err(Error::shape(format!(
            "features have {} dims, layout expects {}",
            x.dims(),
            layout.dims()
        )));
    }
    let base = seed::derive(params.seed, seed::CODEBOOK);
    let centroids = layout
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, block)| {
            let sub = x.gather_columns(block);
            let p = KMeansParams {
                seed: seed::derive(base, j as u64),
                ..params.clone()
            };
            kmeans_fit(&sub, &p).map(|(m, _)| m.centroids)
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(layout.clone(), centroids, params.seed)
}

/// Centroid id per (row, subspace).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    rows: usize,
    subspaces: usize,
    codes: Vec<u32>,
}

impl CodeMatrix {
    pub fn new(rows: usize, subspaces: usize, codes: Vec<u32>) -> Result<Self> {
        if codes.len() != rows * subspaces {
            return Err(Error::shape(format!(
                "{} codes for {rows} rows × {subspaces} subspaces",
                codes.len()
            )));
        }
        Ok(CodeMatrix {
            rows,
            subspaces,
            codes,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn subspaces(&self) -> usize {
        self.subspaces
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.codes[i * self.subspaces..(i + 1) * self.subspaces]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.codes
    }

    pub(crate) fn check_against(&self, cb: &Codebook) -> Result<()> {
        if self.subspaces != cb.subspace_count() {
            return Err(Error::shape(format!(
                "codes have {} subspaces, codebook has {}",
                self.subspaces,
                cb.subspace_count()
            )));
        }
        if let Some(pos) = self.codes.iter().position(|&c| c as usize >= cb.k()) {
            return Err(Error::param(format!(
                "code {} at row {} is out of range for k = {}",
                self.codes[pos],
                pos / self.subspaces,
                cb.k()
            )));
        }
        Ok(())
    }
}

/// Nearest centroid within one subspace, reading the row's channels in
/// block order. Ties go to the lowest id.
#[inline]
fn nearest_in_block(row: &[f32], block: &[u32], centroids: &FeatureMatrix) -> u32 {
    let mut best = (0u32, f64::INFINITY);
    for (id, c) in centroids.iter_rows().enumerate() {
        let mut acc = 0.0f64;
        for (&ch, &v) in block.iter().zip(c) {
            let d = f64::from(row[ch as usize]) - f64::from(v);
            acc += d * d;
        }
        if acc < best.1 {
            best = (id as u32, acc);
        }
    }
    best.0
}

pub fn encode(cb: &Codebook, x: &FeatureMatrix) -> Result<CodeMatrix> {
    cb.check_dims(x.dims())?;
    let s = cb.subspace_count();
    let codes: Vec<u32> = (0..x.rows())
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = x.row(i);
            (0..s).map(move |j| nearest_in_block(row, cb.layout.block(j), &cb.centroids[j]))
        })
        .collect();
    CodeMatrix::new(x.rows(), s, codes)
}

/// Rebuilds rows in original channel order from their codes.
pub fn reconstruct(cb: &Codebook, codes: &CodeMatrix) -> Result<FeatureMatrix> {
    codes.check_against(cb)?;
    let d = cb.layout.dims();
    let mut out = vec![0.0f32; codes.rows() * d];
    if cb.layout.is_partition() {
        out.par_chunks_mut(d).enumerate().for_each(|(i, dst)| {
            for (j, &code) in codes.row(i).iter().enumerate() {
                let c = cb.centroids[j].row(code as usize);
                for (&ch, &v) in cb.layout.block(j).iter().zip(c) {
                    dst[ch as usize] = v;
                }
            }
        });
    } else {
        let mut cover = vec![0u32; d];
        for &ch in cb.layout.blocks().iter().flatten() {
            cover[ch as usize] += 1;
        }
        out.par_chunks_mut(d).enumerate().for_each(|(i, dst)| {
            let mut acc = vec![0.0f64; d];
            for (j, &code) in codes.row(i).iter().enumerate() {
                let c = cb.centroids[j].row(code as usize);
                for (&ch, &v) in cb.layout.block(j).iter().zip(c) {
                    acc[ch as usize] += f64::from(v);
                }
            }
            for ((o, a), &n) in dst.iter_mut().zip(&acc).zip(&cover) {
                *o = (a / f64::from(n)) as f32;
            }
        });
    }
    Ok(FeatureMatrix::from_raw(codes.rows(), d, out))
}

/// Mean squared error per element between two equally shaped matrices.
pub fn mean_squared_error(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    assert_eq!((a.rows(), a.dims()), (b.rows(), b.dims()));
    let total: f64 = a
        .iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| crate::features::squared_distance(x, y))
        .sum();
    total / (a.rows() * a.dims()).max(1) as f64
}

pub const CRCB_MAGIC: &[u8; 4] = b"CRCB";
const CRCB_VERSION: u8 = 1;

/// Serializes a codebook.
///
/// ```text
/// "CRCB" | version u8 | D u32 | M u16 | S u16 | K u32 | seed u64
/// S × [ D* u32 | D* × channel u32 | K × D* × f32 ]
/// ```
///
/// All integers and floats little-endian. The layout seed is not stored; a
/// loaded layout carries the codebook seed.
pub fn encode_codebook(cb: &Codebook) -> Result<Vec<u8>> {
    let too_big = |what: &str| Error::param(format!("{what} does not fit the CRCB header"));
    let d = u32::try_from(cb.layout.dims()).map_err(|_| too_big("D"))?;
    let m = u16::try_from(cb.layout.m()).map_err(|_| too_big("M"))?;
    let s = u16::try_from(cb.subspace_count()).map_err(|_| too_big("S"))?;
    let k = u32::try_from(cb.k()).map_err(|_| too_big("K"))?;
    let mut out = Vec::new();
    out.extend_from_slice(CRCB_MAGIC);
    out.push(CRCB_VERSION);
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&s.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&cb.seed.to_le_bytes());
    for (block, c) in cb.layout.blocks().iter().zip(&cb.centroids) {
        out.extend_from_slice(&(block.len() as u32).to_le_bytes());
        for ch in block {
            out.extend_from_slice(&ch.to_le_bytes());
        }
        bytes::put_f32s(&mut out, c.as_slice());
    }
    Ok(out)
}

pub fn decode_codebook(buf: &[u8]) -> Result<Codebook> {
    let mut r = Reader::new(buf);
    r.magic(CRCB_MAGIC)?;
    let version = r.u8()?;
    if version != CRCB_VERSION {
        return Err(Error::BadVersion(version));
    }
    let d = r.u32()? as usize;
    let m = r.u16()? as usize;
    let s = r.u16()? as usize;
    let k = r.u32()? as usize;
    let seed = r.u64()?;
    if s < m {
        return Err(Error::param(format!("S = {s} is smaller than M = {m}")));
    }
    let mut blocks = Vec::with_capacity(s);
    let mut centroids = Vec::with_capacity(s);
    for _ in 0..s {
        let width = r.u32()? as usize;
        let block = (0..width).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let values = r.f32s(k.checked_mul(width).ok_or_else(|| Error::param("K × D* overflows"))?)?;
        blocks.push(block);
        centroids.push(FeatureMatrix::new(k, width, values)?);
    }
    r.finish()?;
    let layout = SubspaceLayout::from_blocks(d, m, blocks, seed)?;
    Codebook::new(layout, centroids, seed)
}

pub fn save_codebook(cb: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    bytes::write_file(path.as_ref(), &encode_codebook(cb)?)
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    decode_codebook(&bytes::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, d: usize, seed: u64) -> FeatureMatrix {
        let mut rng = seed::rng(seed);
        let data = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f32>>();
        FeatureMatrix::new(n, d, data).unwrap()
    }

    fn sorted(mut v: Vec<u32>) -> Vec<u32> {
        v.sort_unstable();
        v
    }

    #[test]
    fn layout_partition_default() {
        let l = make_layout(512, 2, 9, 0).unwrap();
        assert_eq!((l.subspace_count(), l.subspace_dim()), (2, 256));
        let all: Vec<u32> = l.blocks().concat();
        assert_eq!(sorted(all), (0..512).collect::<Vec<_>>());
        assert!(l.is_partition());
    }

    #[test]
    fn layout_extra_block_from_fresh_permutation() {
        let l = make_layout(512, 2, 9, 1).unwrap();
        assert_eq!(l.subspace_count(), 3);
        assert_eq!(l.blocks().iter().map(Vec::len).sum::<usize>(), 768);
        assert_eq!(make_layout(512, 2, 9, 0).unwrap().blocks(), &l.blocks()[..2]);
        let mut third = l.block(2).to_vec();
        third.dedup();
        assert_eq!(sorted(third).len(), 256);
        // extra = 3 exhausts the second permutation and starts a third
        let l = make_layout(8, 2, 1, 3).unwrap();
        let second: Vec<u32> = [l.block(2), l.block(3)].concat();
        assert_eq!(sorted(second), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn layout_single_block_and_errors() {
        let l = make_layout(4, 1, 0, 0).unwrap();
        assert_eq!(sorted(l.block(0).to_vec()), vec![0, 1, 2, 3]);
        assert!(make_layout(510, 4, 0, 0).is_err());
        assert!(make_layout(8, 0, 0, 0).is_err());
        assert_eq!(make_layout(64, 4, 5, 2).unwrap(), make_layout(64, 4, 5, 2).unwrap());
    }

    #[test]
    fn single_subspace_matches_full_kmeans() {
        let x = random_matrix(60, 6, 1);
        let layout = make_layout(6, 1, 3, 0).unwrap();
        let params = KMeansParams::new(4, 8);
        let cb = fit_codebook(&x, &layout, &params).unwrap();
        let permuted = x.gather_columns(layout.block(0));
        let direct = kmeans_fit(
            &permuted,
            &KMeansParams {
                seed: seed::derive(seed::derive(8, seed::CODEBOOK), 0),
                ..params
            },
        )
        .unwrap()
        .0;
        assert_eq!(cb.centroids(0), &direct.centroids);
    }

    #[test]
    fn identity_quantizer_roundtrip() {
        let x = random_matrix(20, 8, 4);
        for m in [1, 2, 4] {
            let layout = make_layout(8, m, 2, 0).unwrap();
            let cb = fit_codebook(&x, &layout, &KMeansParams::new(20, 1)).unwrap();
            let codes = encode(&cb, &x).unwrap();
            assert_eq!(reconstruct(&cb, &codes).unwrap(), x);
        }
    }

    #[test]
    fn single_subspace_reconstruction_is_nearest_centroid() {
        let x = random_matrix(40, 5, 5);
        let layout = make_layout(5, 1, 0, 0).unwrap();
        let cb = fit_codebook(&x, &layout, &KMeansParams::new(3, 0)).unwrap();
        let rec = reconstruct(&cb, &encode(&cb, &x).unwrap()).unwrap();
        // centroids mapped back to original channel order
        let mut full = vec![vec![0.0f32; 5]; 3];
        for (id, c) in cb.centroids(0).iter_rows().enumerate() {
            for (&ch, &v) in layout.block(0).iter().zip(c) {
                full[id][ch as usize] = v;
            }
        }
        let full = FeatureMatrix::from_rows(&full).unwrap();
        for i in 0..40 {
            let (best, _) = crate::kmeans::nearest(&full, x.row(i));
            assert_eq!(rec.row(i), full.row(best as usize));
        }
    }

    #[test]
    fn encode_reconstruct_is_projection() {
        let x = random_matrix(80, 12, 6);
        let layout = make_layout(12, 2, 1, 0).unwrap();
        let cb = fit_codebook(&x, &layout, &KMeansParams::new(5, 3)).unwrap();
        let once = reconstruct(&cb, &encode(&cb, &x).unwrap()).unwrap();
        let twice = reconstruct(&cb, &encode(&cb, &once).unwrap()).unwrap();
        assert_eq!(once, twice);
        // gathering a subspace back out yields the chosen centroid exactly
        let codes = encode(&cb, &x).unwrap();
        for j in 0..2 {
            let sub = once.gather_columns(layout.block(j));
            for i in 0..80 {
                assert_eq!(sub.row(i), cb.centroids(j).row(codes.row(i)[j] as usize));
            }
        }
    }

    #[test]
    fn encode_tie_goes_low() {
        let layout = SubspaceLayout::identity(1);
        let c = FeatureMatrix::from_rows(&[[-1.0f32], [5.0], [1.0]]).unwrap();
        let cb = Codebook::new(layout, vec![c.clone()], 0).unwrap();
        let codes = encode(&cb, &FeatureMatrix::from_rows(&[[0.0f32], [5.0]]).unwrap()).unwrap();
        assert_eq!(codes.as_slice(), &[0, 1]);
        assert_eq!(encode(&cb, &c).unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn encode_matches_brute_force() {
        let x = random_matrix(50, 8, 10);
        let layout = make_layout(8, 2, 4, 1).unwrap();
        let cb = fit_codebook(&x, &layout, &KMeansParams::new(6, 2)).unwrap();
        let codes = encode(&cb, &x).unwrap();
        for i in 0..50 {
            for j in 0..3 {
                let sub: Vec<f32> = layout.block(j).iter().map(|&c| x.row(i)[c as usize]).collect();
                let dists: Vec<f64> = cb
                    .centroids(j)
                    .iter_rows()
                    .map(|c| crate::features::squared_distance(&sub, c))
                    .collect();
                let chosen = dists[codes.row(i)[j] as usize];
                assert!(dists.iter().all(|&d| chosen <= d));
            }
        }
    }

    #[test]
    fn extra_subspaces_average_overlaps() {
        // 2 channels, m = 1, two blocks that both cover every channel
        let layout = SubspaceLayout::from_blocks(2, 1, vec![vec![0, 1], vec![1, 0]], 0).unwrap();
        let a = FeatureMatrix::from_rows(&[[0.0f32, 2.0]]).unwrap();
        let b = FeatureMatrix::from_rows(&[[4.0f32, 6.0]]).unwrap();
        let cb = Codebook::new(layout, vec![a, b], 0).unwrap();
        let rec = reconstruct(&cb, &CodeMatrix::new(1, 2, vec![0, 0]).unwrap()).unwrap();
        // channel 0: (0 + 6) / 2, channel 1: (2 + 4) / 2
        assert_eq!(rec.row(0), &[3.0, 3.0]);
    }

    #[test]
    fn reconstruct_rejects_bad_code() {
        let x = random_matrix(10, 4, 1);
        let layout = make_layout(4, 2, 0, 0).unwrap();
        let cb = fit_codebook(&x, &layout, &KMeansParams::new(3, 0)).unwrap();
        let bad = CodeMatrix::new(1, 2, vec![0, 3]).unwrap();
        assert!(reconstruct(&cb, &bad).is_err());
        assert!(encode(&cb, &random_matrix(2, 5, 0)).is_err());
    }

    #[test]
    fn crcb_roundtrip_and_corruption() {
        let x = random_matrix(30, 8, 3);
        let layout = make_layout(8, 2, 7, 1).unwrap();
        let cb = fit_codebook(&x, &layout, &KMeansParams::new(4, 7)).unwrap();
        let bytes = encode_codebook(&cb).unwrap();
        let back = decode_codebook(&bytes).unwrap();
        assert_eq!(encode_codebook(&back).unwrap(), bytes);
        assert_eq!(back.layout.blocks(), cb.layout.blocks());
        assert_eq!(back.centroids, cb.centroids);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_codebook(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(
            decode_codebook(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn kmeans_codebook_roundtrip() {
        let x = random_matrix(30, 5, 3);
        let (m, _) = kmeans_fit(&x, &KMeansParams::new(4, 1)).unwrap();
        let cb = Codebook::from_kmeans(&m);
        let back = decode_codebook(&encode_codebook(&cb).unwrap()).unwrap();
        assert_eq!(back.to_kmeans().unwrap().centroids, m.centroids);
        let not_identity = fit_codebook(&x, &make_layout(5, 1, 3, 0).unwrap(), &KMeansParams::new(2, 0)).unwrap();
        if not_identity.layout.block(0) != [0, 1, 2, 3, 4] {
            assert!(not_identity.to_kmeans().is_err());
        }
    }
}
