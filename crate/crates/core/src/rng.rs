//! Deterministic random streams.
//!
//! Every consumer derives its own stream from a master seed and a tuple of
//! stream ids, so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `ids` under `seed`.
pub fn derive(seed: u64, ids: &[u64]) -> u64 {
    ids.iter().fold(mix(seed), |acc, &id| mix(acc ^ mix(id)))
}

pub fn stream(seed: u64, ids: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, ids))
}
