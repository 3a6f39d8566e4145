//! Seed derivation.
//!
//! Every random component takes one user seed. Sub-components derive their
//! own seeds with [`derive`], so changing one stream never perturbs another:
//!
//! | stream                         | derivation                         |
//! |--------------------------------|------------------------------------|
//! | subspace layout permutations   | `derive(seed, LAYOUT)`             |
//! | K-Means for subspace `j`       | `derive(derive(seed, CODEBOOK), j)`|
//! | full-space K-Means (proxy)     | `derive(seed, PROXY)`              |
//! | ITQ rotation init              | `derive(seed, ITQ)`                |
//! | histogram pair sampling        | `derive(seed, HISTOGRAM)`          |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LAYOUT: u64 = 1;
pub const CODEBOOK: u64 = 2;
pub const PROXY: u64 = 3;
pub const ITQ: u64 = 4;
pub const HISTOGRAM: u64 = 5;
pub const TRAIN: u64 = 6;
pub const BENCH: u64 = 7;

/// SplitMix64 finalizer over `(seed, stream)`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
