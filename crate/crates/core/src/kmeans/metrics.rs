//! External clustering-quality scores.
//!
//! NMI is normalized by the arithmetic mean of the two partition entropies
//! (the scikit-learn default). ARI is the Hubert–Arabie adjusted Rand index.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

struct Contingency {
    n: u64,
    /// `(row index, column index, count)` over nonzero cells.
    cells: Vec<(usize, usize, u64)>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

fn contingency(a: &[u32], b: &[u32]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "partition lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Empty("partitions are empty".into()));
    }
    let mut cells: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut rows: BTreeMap<u32, u64> = BTreeMap::new();
    let mut cols: BTreeMap<u32, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let row_pos: BTreeMap<u32, usize> = rows.keys().enumerate().map(|(i, &k)| (k, i)).collect();
    let col_pos: BTreeMap<u32, usize> = cols.keys().enumerate().map(|(i, &k)| (k, i)).collect();
    Ok(Contingency {
        n: a.len() as u64,
        cells: cells
            .into_iter()
            .map(|((x, y), c)| (row_pos[&x], col_pos[&y], c))
            .collect(),
        rows: rows.into_values().collect(),
        cols: cols.into_values().collect(),
    })
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information in `[0, 1]`.
///
/// When both partitions are constant the score is 1; when exactly one is,
/// the mutual information is zero and so is the score.
pub fn nmi(a: &[u32], b: &[u32]) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = t.n as f64;
    let ha = entropy(&t.rows, n);
    let hb = entropy(&t.cols, n);
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = t
        .cells
        .iter()
        .map(|&(i, j, c)| {
            let c = c as f64;
            c / n * (n * c / (t.rows[i] as f64 * t.cols[j] as f64)).ln()
        })
        .sum();
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

fn comb2(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand index in `[-1, 1]` via pair counting.
pub fn ari(a: &[u32], b: &[u32]) -> Result<f64> {
    let t = contingency(a, b)?;
    let total = comb2(t.n);
    if total == 0 {
        return Ok(1.0);
    }
    let index = t.cells.iter().map(|&(_, _, c)| comb2(c)).sum::<u128>() as f64;
    let sa = t.rows.iter().map(|&c| comb2(c)).sum::<u128>() as f64;
    let sb = t.cols.iter().map(|&c| comb2(c)).sum::<u128>() as f64;
    let expected = sa * sb / total as f64;
    let max = (sa + sb) / 2.0;
    if max == expected {
        // only reachable when both partitions are all-singletons or
        // all-one-cluster, i.e. identical
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
