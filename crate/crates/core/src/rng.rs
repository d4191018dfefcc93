//! Seeded generator shared by initialisation, shuffling and synthetic data.
//!
//! xoshiro256** seeded through SplitMix64; the stream depends only on the
//! seed, never on the platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

pub type Rng = Xoshiro256StarStar;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Independent stream for a labelled purpose, derived from one run seed.
pub fn derived(seed: u64, stream: u64) -> Rng {
    seeded(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
