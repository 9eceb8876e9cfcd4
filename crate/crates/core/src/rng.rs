//! Seed derivation. Every random consumer owns a `ChaCha8Rng` whose seed is
//! derived from the run seed plus a fixed tag path, so adding a consumer never
//! shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(base: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tags))
}

/// Stable tags for the independent streams used across the crate.
pub mod tags {
    pub const ACTOR_INIT: u64 = 1;
    pub const GENERATOR_INIT: u64 = 2;
    pub const DISCRIMINATOR_INIT: u64 = 3;
    pub const ROLLOUT_ENV: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const EVAL_ENV: u64 = 6;
    pub const EVAL_POLICY: u64 = 7;
}
