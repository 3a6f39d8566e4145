//! Retrieval metrics and cross-domain distance histograms.
//!
//! Average precision is computed over the whole ranking:
//! `AP = (1/R) Σ_{k : item k relevant} hits(1..=k) / k`, with `R` the number
//! of relevant gallery items. Queries with `R = 0` have no AP; they are
//! skipped and counted instead of contributing zero. Precision at `k` uses
//! `min(k, N)` as denominator.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{squared_distance, FeatureMatrix, LabelList};
use crate::retrieval::RankedList;
use crate::seed;

pub const DEFAULT_PREC_K: usize = 100;
pub const DEFAULT_POSITIVE_PAIRS: usize = 1000;
pub const DEFAULT_NEGATIVE_PAIRS: usize = 9000;

/// AP of one ranking, or `None` when no gallery item is relevant.
pub fn average_precision(
    ranked: &RankedList,
    gallery_labels: &LabelList,
    query_label: u32,
) -> Option<f64> {
    let relevant = gallery_labels.ids().iter().filter(|&&l| l == query_label).count();
    if relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &g) in ranked.order.iter().enumerate() {
        if gallery_labels.id(g as usize) == query_label {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / relevant as f64)
}

pub fn precision_at(
    ranked: &RankedList,
    gallery_labels: &LabelList,
    query_label: u32,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("precision cutoff k must be at least 1"));
    }
    if gallery_labels.is_empty() {
        return Err(Error::Empty("gallery is empty".into()));
    }
    let cut = k.min(gallery_labels.len());
    let hits = ranked
        .order
        .iter()
        .take(cut)
        .filter(|&&g| gallery_labels.id(g as usize) == query_label)
        .count();
    Ok(hits as f64 / cut as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub ap_mean: f64,
    pub prec_mean: f64,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub map_at_all: f64,
    pub prec_at_k: f64,
    pub k: usize,
    /// Keyed by class name.
    pub per_class: BTreeMap<String, ClassStats>,
    pub evaluated_queries: usize,
    pub skipped_queries: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Gallery label id for each query row, matched by class name.
fn query_ids_in_gallery(gallery: &LabelList, queries: &LabelList) -> Vec<Option<u32>> {
    let by_name: BTreeMap<&str, u32> = gallery
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();
    (0..queries.len())
        .map(|i| by_name.get(queries.label(i)).copied())
        .collect()
}

/// Mean AP and mean precision at `k` over all queries that have at least
/// one relevant gallery item. Query labels are matched to gallery labels by
/// class name.
pub fn map_at_all(
    rankings: &[RankedList],
    gallery_labels: &LabelList,
    query_labels: &LabelList,
    k: usize,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::param("precision cutoff k must be at least 1"));
    }
    let ids = query_ids_in_gallery(gallery_labels, query_labels);
    for r in rankings {
        if r.query_id >= query_labels.len() {
            return Err(Error::shape(format!(
                "ranking for query {} but only {} query labels",
                r.query_id,
                query_labels.len()
            )));
        }
        if let Some(&g) = r.order.iter().find(|&&g| g as usize >= gallery_labels.len()) {
            return Err(Error::shape(format!(
                "query {} ranks gallery index {g} but the gallery has {} labels",
                r.query_id,
                gallery_labels.len()
            )));
        }
    }
    let scores: Vec<Option<(f64, f64)>> = rankings
        .par_iter()
        .map(|r| {
            let label = ids[r.query_id]?;
            let ap = average_precision(r, gallery_labels, label)?;
            let p = precision_at(r, gallery_labels, label, k).ok()?;
            Some((ap, p))
        })
        .collect();

    let mut per_class: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    let (mut ap_sum, mut p_sum, mut n, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    for (r, s) in rankings.iter().zip(&scores) {
        match s {
            Some((ap, p)) => {
                ap_sum += ap;
                p_sum += p;
                n += 1;
                let e = per_class
                    .entry(query_labels.label(r.query_id).to_owned())
                    .or_default();
                e.0 += ap;
                e.1 += p;
                e.2 += 1;
            }
            None => skipped += 1,
        }
    }
    if n == 0 {
        return Err(Error::Empty(
            "no query has a relevant gallery item".into(),
        ));
    }
    Ok(EvalReport {
        map_at_all: ap_sum / n as f64,
        prec_at_k: p_sum / n as f64,
        k,
        per_class: per_class
            .into_iter()
            .map(|(name, (ap, p, c))| {
                (
                    name,
                    ClassStats {
                        ap_mean: ap / c as f64,
                        prec_mean: p / c as f64,
                        queries: c,
                    },
                )
            })
            .collect(),
        evaluated_queries: n,
        skipped_queries: skipped,
    })
}

/// Sampled cross-domain distances, binned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceHistogram {
    pub bin_edges: Vec<f64>,
    pub positive_counts: Vec<u64>,
    pub negative_counts: Vec<u64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub positive_mean: f64,
    pub negative_mean: f64,
}

impl DistanceHistogram {
    /// `bin_lo,bin_hi,positive,negative` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,positive,negative\n");
        for b in 0..self.positive_counts.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.bin_edges[b],
                self.bin_edges[b + 1],
                self.positive_counts[b],
                self.negative_counts[b]
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HistogramParams {
    pub n_pos: usize,
    pub n_neg: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for HistogramParams {
    fn default() -> Self {
        HistogramParams {
            n_pos: DEFAULT_POSITIVE_PAIRS,
            n_neg: DEFAULT_NEGATIVE_PAIRS,
            bins: 50,
            seed: 0,
        }
    }
}

/// Uniform sample without replacement of `n` (query, gallery) pairs whose
/// label agreement equals `positive`.
fn sample_pairs(
    q_ids: &[Option<u32>],
    g_ids: &[u32],
    positive: bool,
    n: usize,
    available: u64,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let is_kind = |i: usize, j: usize| (q_ids[i] == Some(g_ids[j])) == positive;
    if (n as u64) * 2 > available {
        // dense request: enumerate and draw an index subset
        let all: Vec<(usize, usize)> = (0..q_ids.len())
            .flat_map(|i| (0..g_ids.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| is_kind(i, j))
            .collect();
        return rand::seq::index::sample(rng, all.len(), n)
            .into_iter()
            .map(|p| all[p])
            .collect();
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (i, j) = (rng.random_range(0..q_ids.len()), rng.random_range(0..g_ids.len()));
        if is_kind(i, j) && seen.insert((i, j)) {
            out.push((i, j));
        }
    }
    out
}

/// Histogram of Euclidean distances between sampled positive (same class)
/// and negative (different class) query–gallery pairs, over equal-width bins
/// spanning the observed range.
pub fn distance_histogram(
    queries: &FeatureMatrix,
    query_labels: &LabelList,
    gallery: &FeatureMatrix,
    gallery_labels: &LabelList,
    params: &HistogramParams,
) -> Result<DistanceHistogram> {
    query_labels.check_pairs(queries)?;
    gallery_labels.check_pairs(gallery)?;
    if queries.dims() != gallery.dims() {
        return Err(Error::shape("query and gallery dimensions differ"));
    }
    if params.bins == 0 {
        return Err(Error::param("histogram needs at least one bin"));
    }
    let q_ids = query_ids_in_gallery(gallery_labels, query_labels);
    let mut g_count = vec![0u64; gallery_labels.class_count()];
    for &g in gallery_labels.ids() {
        g_count[g as usize] += 1;
    }
    let positives: u64 = q_ids.iter().flatten().map(|&c| g_count[c as usize]).sum();
    let negatives = queries.rows() as u64 * gallery.rows() as u64 - positives;
    if params.n_pos as u64 > positives {
        return Err(Error::InsufficientPairs {
            kind: "positive",
            requested: params.n_pos,
            available: positives,
        });
    }
    if params.n_neg as u64 > negatives {
        return Err(Error::InsufficientPairs {
            kind: "negative",
            requested: params.n_neg,
            available: negatives,
        });
    }

    let mut rng = seed::rng(seed::derive(params.seed, seed::HISTOGRAM));
    let g_ids = gallery_labels.ids();
    let pos = sample_pairs(&q_ids, g_ids, true, params.n_pos, positives, &mut rng);
    let neg = sample_pairs(&q_ids, g_ids, false, params.n_neg, negatives, &mut rng);
    let dist = |pairs: &[(usize, usize)]| -> Vec<f64> {
        pairs
            .par_iter()
            .map(|&(i, j)| squared_distance(queries.row(i), gallery.row(j)).sqrt())
            .collect()
    };
    let (dp, dn) = (dist(&pos), dist(&neg));

    let all = dp.iter().chain(&dn);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let width = if hi > lo { (hi - lo) / params.bins as f64 } else { 1.0 };
    let bin = |d: f64| (((d - lo) / width) as usize).min(params.bins - 1);
    let mut positive_counts = vec![0u64; params.bins];
    let mut negative_counts = vec![0u64; params.bins];
    dp.iter().for_each(|&d| positive_counts[bin(d)] += 1);
    dn.iter().for_each(|&d| negative_counts[bin(d)] += 1);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };

    Ok(DistanceHistogram {
        bin_edges: (0..=params.bins).map(|b| lo + width * b as f64).collect(),
        positive_counts,
        negative_counts,
        n_pos: params.n_pos,
        n_neg: params.n_neg,
        positive_mean: mean(&dp),
        negative_mean: mean(&dn),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(order: Vec<u32>) -> RankedList {
        RankedList {
            query_id: 0,
            order,
            distances: None,
        }
    }

    #[test]
    fn perfect_ranking() {
        let g = LabelList::from_ids(&[1, 0, 1, 0]);
        let q = g.id(0);
        assert_eq!(average_precision(&list(vec![0, 2, 1, 3]), &g, q), Some(1.0));
    }

    #[test]
    fn one_zero_one_pattern() {
        let g = LabelList::from_names(["a", "b", "a"]);
        let ap = average_precision(&list(vec![0, 1, 2]), &g, 0).unwrap();
        // (1/2)(1/1 + 2/3) = 5/6
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn no_relevant_is_skip() {
        let g = LabelList::from_names(["a", "b"]);
        assert_eq!(average_precision(&list(vec![0, 1]), &g, 7), None);
    }

    #[test]
    fn map_arithmetic_and_skips() {
        let g = LabelList::from_names(["a", "b", "b"]);
        let q = LabelList::from_names(["a", "b", "zzz"]);
        let r = vec![
            RankedList { query_id: 0, order: vec![0, 1, 2], distances: None },
            // b relevant at ranks 2 and 3: (1/2)(1/2 + 2/3) = 7/12
            RankedList { query_id: 1, order: vec![0, 1, 2], distances: None },
            RankedList { query_id: 2, order: vec![0, 1, 2], distances: None },
        ];
        let rep = map_at_all(&r, &g, &q, 100).unwrap();
        assert_eq!(rep.skipped_queries, 1);
        assert_eq!(rep.evaluated_queries, 2);
        assert!((rep.map_at_all - (1.0 + 7.0 / 12.0) / 2.0).abs() < 1e-15);
        assert_eq!(rep.per_class["b"].queries, 1);
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in ["map_at_all", "prec_at_k", "k", "per_class", "skipped_queries"] {
            assert!(json.get(key).is_some(), "{key}");
        }

        let single = map_at_all(&r[..1], &g, &q, 100).unwrap();
        assert_eq!(single.map_at_all, 1.0);
        assert!(map_at_all(&r[2..], &g, &q, 100).is_err());
    }

    #[test]
    fn precision_denominator() {
        let g = LabelList::from_ids(&[1, 1, 1, 1, 0, 0, 0, 0, 0, 0]);
        let r = list((0..10).collect());
        assert_eq!(precision_at(&r, &g, 0, 100).unwrap(), 0.4);
        assert_eq!(precision_at(&r, &g, 0, 4).unwrap(), 1.0);
        assert!(precision_at(&r, &g, 0, 0).is_err());
        assert!(precision_at(&r, &LabelList::default(), 0, 1).is_err());
    }

    #[test]
    fn histogram_conservation_and_zero() {
        let x = FeatureMatrix::from_rows(&[[0.0f32, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]]).unwrap();
        let l = LabelList::from_names(["a", "a", "b", "b"]);
        // 8 positive pairs, 8 negative: take all positives
        let p = HistogramParams { n_pos: 8, n_neg: 3, bins: 4, seed: 1 };
        let h = distance_histogram(&x, &l, &x, &l, &p).unwrap();
        assert_eq!(h.positive_counts.iter().sum::<u64>(), 8);
        assert_eq!(h.negative_counts.iter().sum::<u64>(), 3);
        assert_eq!(h.bin_edges[0], 0.0);
        assert!(h.positive_counts[0] >= 4);
        let csv = h.to_csv();
        assert_eq!(csv.lines().count(), 5);
        let too_many = HistogramParams { n_pos: 9, ..p };
        assert!(matches!(
            distance_histogram(&x, &l, &x, &l, &too_many),
            Err(Error::InsufficientPairs { kind: "positive", .. })
        ));
    }

    #[test]
    fn histogram_sparse_sampling_is_seeded() {
        let n = 60;
        let rows: Vec<[f32; 1]> = (0..n).map(|i| [i as f32]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let l = LabelList::from_ids(&(0..n as u32).map(|i| i % 6).collect::<Vec<_>>());
        let p = HistogramParams { n_pos: 20, n_neg: 100, bins: 10, seed: 3 };
        let a = distance_histogram(&x, &l, &x, &l, &p).unwrap();
        let b = distance_histogram(&x, &l, &x, &l, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.negative_counts.iter().sum::<u64>(), 100);
    }
}
