//! Seed derivation. Every task draws from its own ChaCha stream keyed by a
//! hash of the master seed and the task's coordinates, so results do not
//! depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a list of task coordinates into the master seed.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(mix64(master), |h, &c| mix64(h ^ mix64(c)))
}

pub fn stream(master: u64, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, coords))
}
