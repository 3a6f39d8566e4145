//! The gallery-side pipeline end to end: subspace codebook, encoding,
//! reconstruction and fusion.

use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::kmeans::KMeansParams;
use crate::quantizer::{encode, fit_codebook, make_layout, reconstruct, CodeMatrix, Codebook};
use crate::retrieval::{fuse, FusedGallery};

pub const DEFAULT_K: usize = 32;
pub const DEFAULT_M: usize = 2;
pub const DEFAULT_LAMBDA: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub m: usize,
    pub lambda: f64,
    pub extra_subspaces: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: DEFAULT_K,
            m: DEFAULT_M,
            lambda: DEFAULT_LAMBDA,
            extra_subspaces: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltGallery {
    pub codebook: Codebook,
    pub codes: CodeMatrix,
    pub reconstructed: FeatureMatrix,
    pub fused: FusedGallery,
}

pub fn build_codebook(gallery: &FeatureMatrix, cfg: &PipelineConfig) -> Result<Codebook> {
    let layout = make_layout(gallery.dims(), cfg.m, cfg.seed, cfg.extra_subspaces)?;
    fit_codebook(gallery, &layout, &KMeansParams::new(cfg.k, cfg.seed))
}

/// Reconstructs `gallery` through `codebook` and fuses with weight `lambda`.
pub fn fuse_with(gallery: &FeatureMatrix, codebook: &Codebook, lambda: f64) -> Result<BuiltGallery> {
    let codes = encode(codebook, gallery)?;
    let reconstructed = reconstruct(codebook, &codes)?;
    let mut fused = fuse(gallery, &reconstructed, lambda)?;
    fused.codebook_seed = Some(codebook.seed());
    Ok(BuiltGallery {
        codebook: codebook.clone(),
        codes,
        reconstructed,
        fused,
    })
}

pub fn build(gallery: &FeatureMatrix, cfg: &PipelineConfig) -> Result<BuiltGallery> {
    let codebook = build_codebook(gallery, cfg)?;
    fuse_with(gallery, &codebook, cfg.lambda)
}
