//! Seed derivation. Every stochastic step draws from its own stream keyed by
//! a master seed and a path of integer tags, so results do not depend on the
//! order in which independent work items are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`. Distinct tag paths give unrelated seeds.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_for(seed: u64, tags: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Stream tags used across the crate.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const BALANCE: u64 = 2;
    pub const EVOLVE: u64 = 3;
    pub const FITNESS: u64 = 4;
    pub const FINAL_MODEL: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const REPETITION: u64 = 7;
    pub const INIT: u64 = 8;
    pub const BREED: u64 = 9;
}
