//! Counter-based random streams.
//!
//! Every random draw in the simulator comes from a stream keyed by a tuple of
//! integers (seed, domain tag, frame, view, keypoint, iteration, ...). Streams
//! are independent of evaluation order, so results do not depend on how many
//! worker threads evaluate frames.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domain tags. Distinct tags keep unrelated draws decorrelated even
/// when the remaining key words coincide.
pub mod domain {
    pub const INFERENCE: u64 = 0x11;
    pub const INITIAL_POOL: u64 = 0x22;
    pub const RANDOM_SELECTION: u64 = 0x33;
    pub const KMEANS: u64 = 0x44;
    pub const SYNTHETIC: u64 = 0x55;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a key tuple into a single 64-bit word.
pub fn hash_key(words: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &w in words {
        h = mix64(h ^ mix64(w.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    h
}

/// Opens the random stream identified by `words`.
pub fn stream(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_key(words))
}
