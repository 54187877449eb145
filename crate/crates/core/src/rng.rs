//! Portable seeded randomness.
//!
//! Every random draw in the engine comes from [`EngineRng`], a ChaCha stream
//! cipher with 8 rounds (`rand_chacha::ChaCha8Rng`). Its output is specified
//! independently of platform and word size, so datasets, splits, weight
//! initializations and dropout masks reproduce bit-for-bit from a `u64` seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type EngineRng = ChaCha8Rng;

/// Creates the engine generator for `seed`.
pub fn seeded(seed: u64) -> EngineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed, so sub-components do not share streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
