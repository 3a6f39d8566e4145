//! Cluster-then-retrieve gallery ranking.
//!
//! The gallery is split into random channel subspaces, each subspace is
//! clustered with K-Means, and every gallery row is rebuilt from its nearest
//! per-subspace centroids. The rebuilt rows are blended with the originals
//! and ranked against query features by Euclidean distance. Around that
//! core the crate provides a lookup-table fast path, centroid-proxy grouped
//! ranking, ITQ binary codes with Hamming ranking, retrieval and clustering
//! metrics, a distribution-alignment loss with a toy trainer, and a seeded
//! synthetic two-domain benchmark.

pub mod align;
pub mod binarize;
pub mod error;
pub mod eval;
pub mod features;
pub mod kmeans;
pub mod pipeline;
pub mod quantizer;
pub mod retrieval;
pub mod seed;
pub mod synth;

mod bytes;

pub use error::{Error, Result};
pub use features::{BinaryCodeMatrix, FeatureMatrix, LabelList};
pub use kmeans::{kmeans_fit, Assignment, KMeansModel, KMeansParams};
