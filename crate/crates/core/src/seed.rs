//! Deterministic sub-seed derivation.
//!
//! Every stochastic component draws from its own ChaCha8 stream. Streams are
//! keyed by `(global seed, stream tag, index)`: the tag names the component
//! (see the `stream` constants) and the index distinguishes replicas such as
//! devices, repeats or test examples. The three words are folded together
//! with the SplitMix64 finalizer, so neighbouring indices give unrelated
//! seeds and the mapping never depends on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used by the library and the CLI.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const DEVICE: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const CHANNEL: u64 = 5;
    pub const TRAIN: u64 = 6;
    pub const TARGET: u64 = 7;
    pub const REPEAT: u64 = 8;
    pub const SPLIT: u64 = 9;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for the `index`-th replica of stream `tag` under `global`.
pub fn derive(global: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ tag) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(global: u64, tag: u64, index: u64) -> Rng {
    rng(derive(global, tag, index))
}
