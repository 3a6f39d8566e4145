//! Gallery ranking: exact Euclidean, fused, lookup-table (ADC) and
//! centroid-proxy grouped ranking.
//!
//! Every path compares squared distances accumulated in `f64` and breaks
//! ties by ascending gallery index, so different paths over the same
//! effective gallery produce the same permutation.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::bytes;
use crate::error::{Error, Result};
use crate::features::{squared_distance, FeatureMatrix};
use crate::kmeans::{Assignment, KMeansModel};
use crate::quantizer::{CodeMatrix, Codebook};

/// Gallery indices for one query, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: usize,
    pub order: Vec<u32>,
    /// Euclidean distances parallel to `order`, when the path has them.
    pub distances: Option<Vec<f64>>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// True if `order` is a permutation of `0..n`.
    pub fn is_permutation_of(&self, n: usize) -> bool {
        if self.order.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        self.order.iter().all(|&i| {
            let i = i as usize;
            i < n && !std::mem::replace(&mut seen[i], true)
        })
    }
}

/// Sorts `(squared distance, index)` pairs ascending with index tie-break
/// and converts to a ranked list with Euclidean distances.
fn ranked_from(query_id: usize, mut scored: Vec<(f64, u32)>) -> RankedList {
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (d2, order): (Vec<f64>, Vec<u32>) = scored.into_iter().unzip();
    RankedList {
        query_id,
        order,
        distances: Some(d2.into_iter().map(f64::sqrt).collect()),
    }
}

fn check_query(q: &[f32], dims: usize) -> Result<()> {
    if q.len() != dims {
        return Err(Error::shape(format!(
            "query has {} dims, gallery has {dims}",
            q.len()
        )));
    }
    Ok(())
}

/// Gallery after reconstruction and convex fusion:
/// `(1 - lambda) · reconstructed + lambda · original`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedGallery {
    pub features: FeatureMatrix,
    pub lambda: f64,
    /// Seed of the codebook that produced the reconstruction, if known.
    pub codebook_seed: Option<u64>,
}

impl FusedGallery {
    /// Recomputes the fusion from its sources and compares bitwise.
    pub fn verify(&self, x: &FeatureMatrix, x_recon: &FeatureMatrix) -> bool {
        fuse(x, x_recon, self.lambda).is_ok_and(|f| f.features == self.features)
    }
}

/// Blends original and reconstructed rows. `lambda = 1` returns the
/// originals and `lambda = 0` the reconstruction, both bit-exactly.
pub fn fuse(x: &FeatureMatrix, x_recon: &FeatureMatrix, lambda: f64) -> Result<FusedGallery> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!("lambda {lambda} outside [0, 1]")));
    }
    if (x.rows(), x.dims()) != (x_recon.rows(), x_recon.dims()) {
        return Err(Error::shape(format!(
            "original is {}×{}, reconstruction is {}×{}",
            x.rows(),
            x.dims(),
            x_recon.rows(),
            x_recon.dims()
        )));
    }
    let data = x
        .as_slice()
        .par_iter()
        .zip(x_recon.as_slice())
        .map(|(&o, &r)| ((1.0 - lambda) * f64::from(r) + lambda * f64::from(o)) as f32)
        .collect();
    Ok(FusedGallery {
        features: FeatureMatrix::new(x.rows(), x.dims(), data)?,
        lambda,
        codebook_seed: None,
    })
}

/// Squared distance from `q` to every gallery row, in row order.
pub fn exact_distances(q: &[f32], gallery: &FeatureMatrix) -> Result<Vec<f64>> {
    check_query(q, gallery.dims())?;
    Ok(gallery.iter_rows().map(|r| squared_distance(q, r)).collect())
}

pub fn rank_exact(q: &[f32], gallery: &FeatureMatrix) -> Result<RankedList> {
    let d = exact_distances(q, gallery)?;
    Ok(ranked_from(0, d.into_iter().zip(0u32..).collect()))
}

pub fn rank_fused(q: &[f32], fused: &FusedGallery) -> Result<RankedList> {
    rank_exact(q, &fused.features)
}

/// Squared sub-distances from one query to every centroid of every
/// subspace, `subspaces × k` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    subspaces: usize,
    k: usize,
    entries: Vec<f64>,
}

impl DistanceTable {
    pub fn build(q: &[f32], cb: &Codebook) -> Result<Self> {
        check_query(q, cb.layout.dims())?;
        let k = cb.k();
        let mut entries = Vec::with_capacity(cb.subspace_count() * k);
        for j in 0..cb.subspace_count() {
            let block = cb.layout.block(j);
            for c in cb.centroids(j).iter_rows() {
                let mut acc = 0.0f64;
                for (&ch, &v) in block.iter().zip(c) {
                    let d = f64::from(q[ch as usize]) - f64::from(v);
                    acc += d * d;
                }
                entries.push(acc);
            }
        }
        Ok(DistanceTable {
            subspaces: cb.subspace_count(),
            k,
            entries,
        })
    }

    pub fn get(&self, subspace: usize, code: u32) -> f64 {
        self.entries[subspace * self.k + code as usize]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sum of table entries selected by one row of codes.
    #[inline]
    pub fn lookup(&self, codes: &[u32]) -> f64 {
        codes
            .iter()
            .enumerate()
            .map(|(j, &c)| self.entries[j * self.k + c as usize])
            .sum()
    }

    /// Squared distance from the query to every encoded gallery row.
    pub fn distances(&self, codes: &CodeMatrix) -> Vec<f64> {
        match self.subspaces {
            // common single-subspace case: plain gather
            1 => codes.as_slice().iter().map(|&c| self.entries[c as usize]).collect(),
            _ => (0..codes.rows()).map(|i| self.lookup(codes.row(i))).collect(),
        }
    }
}

fn check_adc(cb: &Codebook, codes: &CodeMatrix) -> Result<()> {
    if !cb.layout.is_partition() {
        return Err(Error::param(
            "lookup-table ranking needs a pure partition layout (no extra subspaces)",
        ));
    }
    codes.check_against(cb)
}

/// Ranks encoded gallery rows via a per-query lookup table. Equivalent to
/// exact ranking against the reconstructed gallery (fusion weight zero).
pub fn rank_adc(q: &[f32], cb: &Codebook, codes: &CodeMatrix) -> Result<RankedList> {
    check_adc(cb, codes)?;
    let table = DistanceTable::build(q, cb)?;
    let d = table.distances(codes);
    Ok(ranked_from(0, d.into_iter().zip(0u32..).collect()))
}

/// Grouped ranking: clusters ordered by centroid distance, each cluster's
/// members by their own exact distance, ties by index.
///
/// Distances are omitted because they are not monotone across groups.
pub fn centroid_proxy_rank(
    q: &[f32],
    model: &KMeansModel,
    asn: &Assignment,
    gallery: &FeatureMatrix,
) -> Result<RankedList> {
    check_query(q, gallery.dims())?;
    if model.dims() != gallery.dims() {
        return Err(Error::shape(format!(
            "model has {} dims, gallery has {}",
            model.dims(),
            gallery.dims()
        )));
    }
    if asn.len() != gallery.rows() {
        return Err(Error::shape(format!(
            "assignment covers {} rows, gallery has {}",
            asn.len(),
            gallery.rows()
        )));
    }
    let k = model.k();
    if let Some(&bad) = asn.ids().iter().find(|&&c| c as usize >= k) {
        return Err(Error::param(format!("cluster id {bad} out of range for k = {k}")));
    }
    let mut clusters: Vec<(f64, u32)> = model
        .centroids
        .iter_rows()
        .zip(0u32..)
        .map(|(c, j)| (squared_distance(q, c), j))
        .collect();
    clusters.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let members = asn.members(k);
    let mut order = Vec::with_capacity(gallery.rows());
    for &(_, j) in &clusters {
        let mut scored: Vec<(f64, u32)> = members[j as usize]
            .iter()
            .map(|&i| (squared_distance(q, gallery.row(i)), i as u32))
            .collect();
        scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.extend(scored.into_iter().map(|(_, i)| i));
    }
    Ok(RankedList {
        query_id: 0,
        order,
        distances: None,
    })
}

/// Ranks every query row in parallel, tagging lists with their query index.
pub fn rank_queries<F>(queries: &FeatureMatrix, rank: F) -> Result<Vec<RankedList>>
where
    F: Fn(&[f32]) -> Result<RankedList> + Sync,
{
    (0..queries.rows())
        .into_par_iter()
        .map(|i| {
            rank(queries.row(i)).map(|mut r| {
                r.query_id = i;
                r
            })
        })
        .collect()
}

/// Formats rankings as `<query>\t<g1> <g2> ...` lines, optionally keeping
/// only the first `top` entries of each.
pub fn format_rankings(lists: &[RankedList], top: Option<usize>) -> String {
    let mut out = String::new();
    for r in lists {
        write!(out, "{}\t", r.query_id).unwrap();
        let n = top.map_or(r.order.len(), |t| t.min(r.order.len()));
        for (i, g) in r.order[..n].iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{g}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_rankings(text: &str) -> Result<Vec<RankedList>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(row, line)| {
            let bad = |msg: String| Error::Parse { row, msg };
            let (q, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad("missing tab after query index".into()))?;
            let query_id = q.parse().map_err(|e| bad(format!("query index {q:?}: {e}")))?;
            let order = rest
                .split_ascii_whitespace()
                .map(|g| g.parse().map_err(|e| bad(format!("gallery index {g:?}: {e}"))))
                .collect::<Result<Vec<u32>>>()?;
            Ok(RankedList {
                query_id,
                order,
                distances: None,
            })
        })
        .collect()
}

pub fn save_rankings(lists: &[RankedList], top: Option<usize>, path: impl AsRef<Path>) -> Result<()> {
    bytes::write_file(path.as_ref(), format_rankings(lists, top).as_bytes())
}

pub fn load_rankings(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let buf = bytes::read_file(path.as_ref())?;
    let text = String::from_utf8(buf).map_err(|e| Error::Parse {
        row: 0,
        msg: format!("invalid utf-8: {e}"),
    })?;
    parse_rankings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::{kmeans_fit, KMeansParams};
    use crate::quantizer::{encode, fit_codebook, make_layout, reconstruct};
    use crate::seed;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, d: usize, seed: u64) -> FeatureMatrix {
        let mut rng = seed::rng(seed);
        let data = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f32>>();
        FeatureMatrix::new(n, d, data).unwrap()
    }

    /// O(N·D) oracle: selection by repeated minimum scan.
    fn brute_rank(q: &[f32], g: &FeatureMatrix) -> Vec<u32> {
        let mut left: Vec<usize> = (0..g.rows()).collect();
        let mut out = Vec::new();
        while !left.is_empty() {
            let mut best = 0;
            for p in 1..left.len() {
                let (a, b) = (left[p], left[best]);
                let (da, db) = (squared_distance(q, g.row(a)), squared_distance(q, g.row(b)));
                if da < db || (da == db && a < b) {
                    best = p;
                }
            }
            out.push(left.remove(best) as u32);
        }
        out
    }

    #[test]
    fn fuse_endpoints_and_default() {
        let x = FeatureMatrix::from_rows(&[[1.0f32, 1.0]]).unwrap();
        let r = FeatureMatrix::from_rows(&[[0.0f32, 0.0]]).unwrap();
        assert_eq!(fuse(&x, &r, 1.0).unwrap().features, x);
        assert_eq!(fuse(&x, &r, 0.0).unwrap().features, r);
        let f = fuse(&x, &r, 0.2).unwrap();
        assert_eq!(f.features.row(0), &[0.2, 0.2]);
        assert!(f.verify(&x, &r));
        assert!(fuse(&x, &r, 1.5).is_err());
        assert!(fuse(&x, &FeatureMatrix::zeros(1, 3), 0.5).is_err());
    }

    #[test]
    fn exact_self_match_and_ties() {
        let g = random_matrix(10, 4, 1);
        let r = rank_exact(g.row(7), &g).unwrap();
        assert_eq!(r.order[0], 7);
        assert_eq!(r.distances.as_ref().unwrap()[0], 0.0);

        let g = FeatureMatrix::from_rows(&[[9.0f32], [9.0], [9.0], [1.0], [9.0], [-1.0]]).unwrap();
        let r = rank_exact(&[0.0], &g).unwrap();
        assert_eq!(&r.order[..2], &[3, 5]);
        assert!(rank_exact(&[0.0, 1.0], &g).is_err());
    }

    #[test]
    fn exact_matches_brute_force() {
        for s in 0..5 {
            let g = random_matrix(10, 4, s);
            let q = random_matrix(1, 4, 100 + s);
            assert_eq!(rank_exact(q.row(0), &g).unwrap().order, brute_rank(q.row(0), &g));
        }
    }

    #[test]
    fn adc_matches_reconstructed_exact() {
        let g = random_matrix(60, 8, 3);
        let q = random_matrix(5, 8, 4);
        let layout = make_layout(8, 2, 1, 0).unwrap();
        let cb = fit_codebook(&g, &layout, &KMeansParams::new(4, 2)).unwrap();
        let codes = encode(&cb, &g).unwrap();
        let rec = reconstruct(&cb, &codes).unwrap();
        for qi in q.iter_rows() {
            let adc = rank_adc(qi, &cb, &codes).unwrap();
            let exact = rank_exact(qi, &rec).unwrap();
            assert_eq!(adc.order, exact.order);
            for (a, e) in adc.distances.unwrap().iter().zip(exact.distances.unwrap()) {
                assert!((a - e).abs() <= 1e-4 * e.max(1e-12));
            }
            let fused = fuse(&g, &rec, 0.0).unwrap();
            assert_eq!(rank_fused(qi, &fused).unwrap().order, exact.order);
        }
    }

    #[test]
    fn adc_identity_quantizer_equals_exact() {
        let g = random_matrix(16, 6, 8);
        let layout = make_layout(6, 3, 1, 0).unwrap();
        let cb = fit_codebook(&g, &layout, &KMeansParams::new(16, 2)).unwrap();
        let codes = encode(&cb, &g).unwrap();
        let q = random_matrix(1, 6, 9);
        assert_eq!(
            rank_adc(q.row(0), &cb, &codes).unwrap().order,
            rank_exact(q.row(0), &g).unwrap().order
        );
    }

    #[test]
    fn adc_rejects_extra_subspaces() {
        let g = random_matrix(20, 4, 1);
        let cb = fit_codebook(&g, &make_layout(4, 2, 0, 1).unwrap(), &KMeansParams::new(3, 0)).unwrap();
        let codes = encode(&cb, &g).unwrap();
        assert!(rank_adc(g.row(0), &cb, &codes).is_err());
    }

    #[test]
    fn table_cost_model() {
        // table build: S·K·D* = K·D multiplies; scan: N·S adds; exact: N·D
        let (n, d, k, s) = (17_101u64, 512u64, 32u64, 1u64);
        let table = s * k * (d / s);
        assert_eq!(table, k * d);
        let ratio = (n * d) as f64 / table as f64;
        assert!((ratio - n as f64 / k as f64).abs() < 1e-9);
        assert!(ratio > 534.0 && ratio < 535.0);
        assert!(n * s < n * d);
    }

    #[test]
    fn proxy_reductions() {
        let g = random_matrix(25, 3, 5);
        let q = random_matrix(1, 3, 6);
        let exact = rank_exact(q.row(0), &g).unwrap().order;
        for k in [1, 25] {
            let (m, a) = kmeans_fit(&g, &KMeansParams::new(k, 0)).unwrap();
            let r = centroid_proxy_rank(q.row(0), &m, &a, &g).unwrap();
            assert_eq!(r.order, exact, "k = {k}");
        }
    }

    #[test]
    fn proxy_groups_clusters() {
        let g = FeatureMatrix::from_rows(&[
            [0.0f32, 0.0], [10.0, 10.0], [0.5, 0.0], [10.5, 10.0], [0.0, 0.5], [9.0, 9.0],
        ])
        .unwrap();
        let (m, a) = kmeans_fit(&g, &KMeansParams::new(2, 1)).unwrap();
        let c0 = a.cluster_id[0] as usize;
        let q = m.centroids.row(c0).to_vec();
        let r = centroid_proxy_rank(&q, &m, &a, &g).unwrap();
        let groups: Vec<u32> = r.order.iter().map(|&i| a.cluster_id[i as usize]).collect();
        let split = groups.iter().take_while(|&&c| c as usize == c0).count();
        assert_eq!(split, 3);
        assert!(groups[split..].iter().all(|&c| c as usize != c0));
        assert!(r.is_permutation_of(6));
    }

    #[test]
    fn proxy_rejects_inconsistent() {
        let g = random_matrix(6, 2, 0);
        let (m, a) = kmeans_fit(&g, &KMeansParams::new(2, 0)).unwrap();
        let short = Assignment { cluster_id: vec![0; 5] };
        assert!(centroid_proxy_rank(g.row(0), &m, &short, &g).is_err());
        let bad = Assignment { cluster_id: vec![0, 0, 0, 0, 0, 7] };
        assert!(centroid_proxy_rank(g.row(0), &m, &bad, &g).is_err());
        assert!(centroid_proxy_rank(&[0.0], &m, &a, &g).is_err());
    }

    #[test]
    fn ranking_file_roundtrip_and_top() {
        let lists = vec![
            RankedList { query_id: 0, order: vec![2, 0, 1], distances: None },
            RankedList { query_id: 1, order: vec![1, 2, 0], distances: None },
        ];
        let text = format_rankings(&lists, None);
        assert_eq!(text, "0\t2 0 1\n1\t1 2 0\n");
        assert_eq!(parse_rankings(&text).unwrap(), lists);
        assert_eq!(format_rankings(&lists, Some(1)), "0\t2\n1\t1\n");
        assert!(parse_rankings("0 1 2\n").is_err());
    }

    proptest! {
        #[test]
        fn scale_invariance(seed in any::<u64>(), exp in -3i32..4) {
            let g = random_matrix(30, 5, seed);
            let q = random_matrix(1, 5, seed ^ 1);
            let c = 2f32.powi(exp);
            let base = rank_exact(q.row(0), &g).unwrap().order;
            let scaled = rank_exact(q.scaled(c).unwrap().row(0), &g.scaled(c).unwrap()).unwrap().order;
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn proxy_is_permutation(seed in any::<u64>(), k in 1usize..8) {
            let g = random_matrix(20, 3, seed);
            let (m, a) = kmeans_fit(&g, &KMeansParams::new(k, seed)).unwrap();
            let r = centroid_proxy_rank(g.row(3), &m, &a, &g).unwrap();
            prop_assert!(r.is_permutation_of(20));
        }
    }
}
