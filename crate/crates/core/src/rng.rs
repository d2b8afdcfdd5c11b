//! Seed derivation.
//!
//! Every stochastic step draws from a ChaCha8 stream whose seed is derived
//! from the run seed plus a purpose tag and indices (epoch, repetition, ...),
//! so runs reproduce exactly regardless of the order in which phases execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(base), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Purpose tags, so that streams for different phases never coincide.
pub mod purpose {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRIPLETS: u64 = 3;
    pub const VALIDATION: u64 = 4;
    pub const ATTENTION: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const SYNTH: u64 = 7;
    pub const FITB: u64 = 8;
}

pub fn rng_for(base: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, tags))
}
