//! Training core for long-tailed classification with auxiliary heads.
//!
//! A shared feature extractor feeds three linear heads: the primary classifier
//! trained on class-balanced batches, an auxiliary classifier trained on
//! regular random batches, and a rotation classifier trained on a
//! self-supervised quarter-turn prediction task. Only the feature extractor
//! and the primary classifier are used for prediction.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line runner live in the `ltlab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod evalkit;
pub mod model;
pub mod ndgrad;
pub mod sampling;
pub mod synthlt;
pub mod train;

pub use error::{Error, Result};

/// Seedable generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Identifier recorded in configs and manifests for [`Rng`].
pub const RNG_ALGORITHM: &str = "chacha8";

/// Builds the crate RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derives an independent sub-stream seed so that distinct consumers
/// (samplers, initialisation, rotation labels) never share a generator.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
