//! Seeding rules.
//!
//! Every stream is a `ChaCha8Rng` seeded through `SeedableRng::seed_from_u64`.
//! Parallel work never shares a generator: each replicate gets a child seed
//! derived from the master seed and the replicate's coordinates with
//! [`child_seed`], so results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of indices into the master seed: `h <- mix64(h ^ mix64(i))`
/// for each index in order, starting from `h = mix64(master)`.
pub fn child_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(master), |h, &i| mix64(h ^ mix64(i)))
}
