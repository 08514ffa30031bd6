//! Seed mixing and counter-based random streams.
//!
//! Every random quantity in the crate is derived from a 64-bit seed through
//! the SplitMix64 finalizer, so streams never depend on thread scheduling.
//! Matrix entries are drawn from `entry_uniform(seed, row, col)`, which is a
//! pure function of its three arguments; sequential consumers (shuffles,
//! k-means++ seeding) use a ChaCha8 generator keyed by a mixed seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into one 64-bit value.
///
/// Each word is absorbed with a SplitMix64 round, so `mix(&[a, b])` and
/// `mix(&[b, a])` differ and no word can cancel another.
pub fn mix(words: &[u64]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C908u64;
    for &w in words {
        h = splitmix64(h ^ splitmix64(w));
    }
    h
}

/// Uniform value in `[0, 1)` for entry `(row, col)` of the stream `seed`.
#[inline]
pub fn entry_uniform(seed: u64, row: u64, col: u64) -> f64 {
    let bits = mix(&[seed, row, col]) >> 11;
    bits as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential generator for the stream `(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, tag]))
}

/// Stream tags used across the crate.
pub(crate) mod tags {
    pub const ROW_ORDER: u64 = 1;
    pub const ENTRIES: u64 = 2;
    pub const SVD_INIT: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const CENTERS_FIRST: u64 = 5;
    pub const CENTERS_SECOND: u64 = 6;
    pub const KMEANS_RESTART: u64 = 7;
    pub const FRESH_SAMPLES: u64 = 8;
    pub const TRIAL_DATA: u64 = 9;
    pub const TRIAL_CLUSTER: u64 = 10;
    pub const TRIAL_DIAGNOSTICS: u64 = 11;
}
