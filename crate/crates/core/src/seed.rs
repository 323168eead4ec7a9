//! Deterministic random stream derivation.
//!
//! Every replicate of a batch draws from its own ChaCha8 stream selected by
//! `(seed, replicate index)`, so results never depend on scheduling.
//! Independent sub-experiments (grid cells, coefficient draws) get their own
//! seed through [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// The random stream with index `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a seed (SplitMix64 finalizer on both halves).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
