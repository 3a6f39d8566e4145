//! Seeded synthetic data with the structure the pipeline targets.
//!
//! Each class has a Gaussian prototype and several view modes: gallery rows
//! cycle through the modes, so a class occupies several sub-clusters. Mode 0
//! sits on the prototype. Queries come from mode 0 shifted by one global
//! domain-shift vector. All vectors are drawn per coordinate with standard
//! deviation `scale / √D`, so `scale` is roughly the vector norm.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::align::{Domain, TwoDomainSet};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabelList};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub classes: usize,
    pub gallery_per_class: usize,
    pub queries_per_class: usize,
    pub dims: usize,
    pub view_modes: usize,
    /// Norm of the class prototypes.
    pub class_spread: f64,
    /// Norm of each non-zero view-mode offset.
    pub mode_spread: f64,
    pub domain_shift: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            classes: 25,
            gallery_per_class: 40,
            queries_per_class: 8,
            dims: 512,
            view_modes: 4,
            class_spread: 1.0,
            mode_spread: 0.9,
            domain_shift: 1.0,
            noise: 2.5,
            seed: 7,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.gallery_per_class == 0 || self.queries_per_class == 0 {
            return Err(Error::param("class and per-class counts must be positive"));
        }
        if self.dims == 0 || self.view_modes == 0 {
            return Err(Error::param("dims and view modes must be positive"));
        }
        let spreads = [self.class_spread, self.mode_spread, self.domain_shift, self.noise];
        if spreads.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::param("spreads, shift and noise must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bench {
    pub gallery: FeatureMatrix,
    pub gallery_labels: LabelList,
    pub queries: FeatureMatrix,
    pub query_labels: LabelList,
}

fn gaussian(rng: &mut impl rand::Rng, dims: usize, scale: f64) -> Vec<f64> {
    let sd = scale / (dims as f64).sqrt();
    (0..dims)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn class_name(c: usize) -> String {
    format!("class{c:03}")
}

/// Gallery and query rows for every class. Classes use independent derived
/// seeds, so generation is parallel and still deterministic.
pub fn generate(spec: &BenchSpec) -> Result<Bench> {
    spec.validate()?;
    let base = seed::derive(spec.seed, seed::BENCH);
    let shift = gaussian(&mut seed::rng(base), spec.dims, spec.domain_shift);
    let d = spec.dims;

    let per_class: Vec<(Vec<f32>, Vec<f32>)> = (0..spec.classes)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(seed::derive(base, c as u64 + 1));
            let proto = gaussian(&mut rng, d, spec.class_spread);
            let mut modes = vec![vec![0.0; d]];
            for _ in 1..spec.view_modes {
                modes.push(gaussian(&mut rng, d, spec.mode_spread));
            }
            let mut gallery = Vec::with_capacity(spec.gallery_per_class * d);
            for i in 0..spec.gallery_per_class {
                let noise = gaussian(&mut rng, d, spec.noise);
                let mode = &modes[i % spec.view_modes];
                gallery.extend((0..d).map(|j| (proto[j] + mode[j] + noise[j]) as f32));
            }
            let mut queries = Vec::with_capacity(spec.queries_per_class * d);
            for _ in 0..spec.queries_per_class {
                let noise = gaussian(&mut rng, d, spec.noise);
                queries.extend((0..d).map(|j| (proto[j] + shift[j] + noise[j]) as f32));
            }
            (gallery, queries)
        })
        .collect();

    let labels = |per: usize| {
        LabelList::from_names((0..spec.classes).flat_map(|c| std::iter::repeat_n(class_name(c), per)))
    };
    let (g, q): (Vec<_>, Vec<_>) = per_class.into_iter().unzip();
    Ok(Bench {
        gallery: FeatureMatrix::new(spec.classes * spec.gallery_per_class, d, g.concat())?,
        gallery_labels: labels(spec.gallery_per_class),
        queries: FeatureMatrix::new(spec.classes * spec.queries_per_class, d, q.concat())?,
        query_labels: labels(spec.queries_per_class),
    })
}

/// Two-domain training data for the toy aligner. Images are prototype +
/// view mode + noise; sketches keep only a fixed random subset of the
/// prototype's coordinates and add a global shift + noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoDomainSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dims: usize,
    pub view_modes: usize,
    /// Fraction of coordinates a sketch keeps.
    pub sketch_keep: f64,
    pub class_spread: f64,
    pub mode_spread: f64,
    pub domain_shift: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for TwoDomainSpec {
    fn default() -> Self {
        TwoDomainSpec {
            classes: 10,
            per_class: 20,
            dims: 32,
            view_modes: 3,
            sketch_keep: 0.5,
            class_spread: 4.0,
            mode_spread: 2.0,
            domain_shift: 3.0,
            noise: 1.0,
            seed: 11,
        }
    }
}

pub fn two_domain(spec: &TwoDomainSpec) -> Result<TwoDomainSet> {
    if spec.classes == 0 || spec.per_class == 0 || spec.dims == 0 || spec.view_modes == 0 {
        return Err(Error::param("counts must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.sketch_keep) {
        return Err(Error::param("sketch_keep must lie in [0, 1]"));
    }
    let d = spec.dims;
    let mut rng = seed::rng(seed::derive(spec.seed, seed::BENCH));
    let shift = gaussian(&mut rng, d, spec.domain_shift);
    let mut coords: Vec<usize> = (0..d).collect();
    rand::seq::SliceRandom::shuffle(coords.as_mut_slice(), &mut rng);
    let mut keep = vec![false; d];
    coords[..(spec.sketch_keep * d as f64).round() as usize]
        .iter()
        .for_each(|&j| keep[j] = true);

    let (mut rows, mut domains, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..spec.classes {
        let proto = gaussian(&mut rng, d, spec.class_spread);
        let mut modes = vec![vec![0.0; d]];
        for _ in 1..spec.view_modes {
            modes.push(gaussian(&mut rng, d, spec.mode_spread));
        }
        for i in 0..spec.per_class {
            let noise = gaussian(&mut rng, d, spec.noise);
            let mode = &modes[i % spec.view_modes];
            rows.extend((0..d).map(|j| (proto[j] + mode[j] + noise[j]) as f32));
            domains.push(Domain::Image);
            labels.push(c as u32);
        }
        for _ in 0..spec.per_class {
            let noise = gaussian(&mut rng, d, spec.noise);
            rows.extend(
                (0..d).map(|j| ((if keep[j] { proto[j] } else { 0.0 }) + shift[j] + noise[j]) as f32),
            );
            domains.push(Domain::Sketch);
            labels.push(c as u32);
        }
    }
    Ok(TwoDomainSet {
        inputs: FeatureMatrix::new(domains.len(), d, rows)?,
        domains,
        labels,
        classes: spec.classes,
    })
}
