//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`.
//! Experiment cells get their seed by folding the cell coordinates into the
//! base seed with the SplitMix64 finalizer:
//!
//! ```text
//! h = mix(base_seed ^ DOMAIN)
//! for word in [model code, |E|, n, repetition]:
//!     h = mix(h ^ word)
//! ```
//!
//! Within a cell, the graph, ground-truth, and review streams use
//! `stream_seed(cell_seed, 1..=3)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN: u64 = 0x7472_7574_6862_6e64; // "truthbnd"
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function. A bijection on `u64`.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a sequence of words into `base` one at a time.
pub fn derive(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix(base ^ DOMAIN), |h, &w| mix(h ^ w))
}

/// Seed of an independent sub-stream of `seed`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    mix(seed ^ stream.wrapping_mul(GOLDEN))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
