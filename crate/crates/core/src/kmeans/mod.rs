//! Lloyd's K-Means with k-means++ seeding.
//!
//! Distances accumulate in `f64` in a fixed per-row order and centroid sums
//! are reduced over fixed-size row chunks in chunk order, so a fit is
//! bitwise reproducible for a given seed no matter how many worker threads
//! rayon uses.

mod metrics;

use rand::Rng;
use rayon::prelude::*;

pub use metrics::{ari, nmi};

use crate::error::{Error, Result};
use crate::features::{squared_distance, FeatureMatrix};
use crate::seed;

/// Rows per chunk in the centroid reduction. Fixed so the summation tree
/// does not depend on the thread pool.
const REDUCE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the relative inertia improvement drops below this.
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iters: 100,
            tol: 1e-4,
        }
    }
}

/// A fitted clustering: `k` centroids that are the means of their members.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: FeatureMatrix,
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
    /// Inertia after the seeding assignment and after every Lloyd update.
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dims(&self) -> usize {
        self.centroids.dims()
    }

    /// Wraps given centroids without fitting.
    pub fn from_centroids(centroids: FeatureMatrix, seed: u64) -> Self {
        KMeansModel {
            centroids,
            inertia: 0.0,
            seed,
            iterations_run: 0,
            inertia_history: Vec::new(),
        }
    }
}

/// Cluster id per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub cluster_id: Vec<u32>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.cluster_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_id.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.cluster_id
    }

    /// Member rows of each cluster, in ascending row order.
    pub fn members(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); k];
        for (i, &c) in self.cluster_id.iter().enumerate() {
            out[c as usize].push(i);
        }
        out
    }
}

/// Nearest centroid under Euclidean distance, ties to the lowest id.
#[inline]
pub(crate) fn nearest(centroids: &FeatureMatrix, row: &[f32]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = squared_distance(row, c);
        if d < best.1 {
            best = (j as u32, d);
        }
    }
    best
}

fn assign_step(x: &FeatureMatrix, centroids: &FeatureMatrix) -> (Vec<u32>, Vec<f64>) {
    (0..x.rows())
        .into_par_iter()
        .map(|i| nearest(centroids, x.row(i)))
        .unzip()
}

fn sum_in_order(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Arithmetic mean of each cluster's members. Every cluster must be
/// nonempty.
fn means(x: &FeatureMatrix, asn: &[u32], k: usize) -> FeatureMatrix {
    let d = x.dims();
    let partials: Vec<(Vec<f64>, Vec<u64>)> = asn
        .par_chunks(REDUCE_CHUNK)
        .enumerate()
        .map(|(chunk, ids)| {
            let mut sums = vec![0.0f64; k * d];
            let mut counts = vec![0u64; k];
            for (off, &c) in ids.iter().enumerate() {
                let row = x.row(chunk * REDUCE_CHUNK + off);
                let acc = &mut sums[c as usize * d..(c as usize + 1) * d];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += f64::from(v);
                }
                counts[c as usize] += 1;
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0u64; k];
    for (s, c) in &partials {
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    let data = sums
        .chunks_exact(d.max(1))
        .zip(&counts)
        .flat_map(|(s, &n)| {
            debug_assert!(n > 0);
            s.iter().map(move |v| (v / n as f64) as f32)
        })
        .collect::<Vec<_>>();
    FeatureMatrix::from_raw(k, d, data)
}

/// Moves, for every empty cluster, the point farthest from its centroid
/// into that cluster. Donor clusters always keep at least one member.
fn repair_empty(asn: &mut [u32], dist: &mut [f64], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    for &c in asn.iter() {
        counts[c as usize] += 1;
    }
    let mut repaired = 0;
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut best: Option<usize> = None;
        for i in 0..asn.len() {
            if counts[asn[i] as usize] > 1 && best.is_none_or(|b| dist[i] > dist[b]) {
                best = Some(i);
            }
        }
        // k <= n guarantees a donor exists
        let p = best.expect("no donor cluster for empty-cluster repair");
        counts[asn[p] as usize] -= 1;
        counts[j] += 1;
        asn[p] = j as u32;
        dist[p] = 0.0;
        repaired += 1;
    }
    repaired
}

fn sse(x: &FeatureMatrix, centroids: &FeatureMatrix, asn: &[u32]) -> f64 {
    let d: Vec<f64> = (0..x.rows())
        .into_par_iter()
        .map(|i| squared_distance(x.row(i), centroids.row(asn[i] as usize)))
        .collect();
    sum_in_order(&d)
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center. When every remaining point
/// coincides with a chosen center, an unchosen point is drawn uniformly.
fn plus_plus(x: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> FeatureMatrix {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| squared_distance(x.row(i), x.row(first)))
        .collect();
    while chosen.len() < k {
        let total = sum_in_order(&d2);
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        let c = x.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, w)| {
            let d = squared_distance(x.row(i), c);
            if d < *w {
                *w = d;
            }
        });
    }
    x.select_rows(&chosen)
}

/// Fits `params.k` clusters to the rows of `x`.
///
/// At return every centroid is the mean of the rows assigned to it, no
/// cluster is empty, and `inertia_history` is non-increasing.
pub fn kmeans_fit(x: &FeatureMatrix, params: &KMeansParams) -> Result<(KMeansModel, Assignment)> {
    let (n, k) = (x.rows(), params.k);
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds row count {n}")));
    }
    if params.max_iters == 0 {
        return Err(Error::param("max_iters must be at least 1"));
    }
    if !(params.tol >= 0.0 && params.tol.is_finite()) {
        return Err(Error::param(format!("tol must be finite and >= 0, got {}", params.tol)));
    }
    if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / x.dims(),
            col: pos % x.dims(),
        });
    }

    let mut rng = seed::rng(params.seed);
    let mut centroids = plus_plus(x, k, &mut rng);
    let (mut asn, mut dist) = assign_step(x, &centroids);
    let mut inertia = sum_in_order(&dist);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut stable = false;

    while iterations < params.max_iters {
        repair_empty(&mut asn, &mut dist, k);
        centroids = means(x, &asn, k);
        iterations += 1;
        let (next_asn, next_dist) = assign_step(x, &centroids);
        let next_inertia = sum_in_order(&next_dist);
        history.push(next_inertia);
        stable = next_asn == asn;
        let improvement = inertia - next_inertia;
        let converged = stable || inertia == 0.0 || improvement < params.tol * inertia;
        asn = next_asn;
        dist = next_dist;
        inertia = next_inertia;
        if converged {
            break;
        }
    }

    if !stable {
        // last assignment moved points; re-center so centroids are exact means
        repair_empty(&mut asn, &mut dist, k);
        centroids = means(x, &asn, k);
        inertia = sse(x, &centroids, &asn);
        history.push(inertia);
    }

    log::debug!(
        "kmeans: k={k} n={n} iters={iterations} inertia={inertia:.6e} stable={stable}"
    );
    Ok((
        KMeansModel {
            centroids,
            inertia,
            seed: params.seed,
            iterations_run: iterations,
            inertia_history: history,
        },
        Assignment { cluster_id: asn },
    ))
}

/// Maps each row to its nearest centroid (ties to the lowest id).
pub fn assign(model: &KMeansModel, x: &FeatureMatrix) -> Result<Assignment> {
    if x.dims() != model.dims() {
        return Err(Error::shape(format!(
            "features have {} dims, model has {}",
            x.dims(),
            model.dims()
        )));
    }
    Ok(Assignment {
        cluster_id: assign_step(x, &model.centroids).0,
    })
}
