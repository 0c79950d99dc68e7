//! Seed derivation. Every random stream in the crate is a ChaCha generator
//! seeded from a top-level seed and a path of stream labels, so parallel or
//! reordered work reproduces the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

// Stream labels.
pub(crate) const IDENTITY: u64 = 1;
pub(crate) const FRAME: u64 = 2;
pub(crate) const PAIRS: u64 = 3;
pub(crate) const AUGMENT: u64 = 4;
pub(crate) const SPLIT: u64 = 5;
pub(crate) const EVAL_PAIRS: u64 = 6;
