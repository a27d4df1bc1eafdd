// SPDX-License-Identifier: Apache-2.0

//! Seeded randomness.
//!
//! Every stochastic operation takes a `u64` seed and builds its own ChaCha
//! generator from it. ChaCha is counter based, so independent sub-streams are
//! obtained by selecting a stream number rather than by drawing seeds from a
//! parent generator. Nothing here holds global state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `seed`, stream 0.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for an independent sub-stream of `seed`.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Deterministic child seed, for APIs that take a seed rather than a generator.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream identifiers used across the crate, kept in one place so that no two
/// consumers of the same seed share a stream by accident.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const TRAIN_DRAW: u64 = 2;
    pub const TEST_DRAW: u64 = 3;
    pub const CM_TRAIN: u64 = 4;
    pub const TM_TRAIN: u64 = 5;
    pub const TRANSFER: u64 = 6;
    pub const ROBUST: u64 = 7;
    pub const CM_SPLIT: u64 = 8;
    pub const TUNING: u64 = 9;
}
