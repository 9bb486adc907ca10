//! Counter-based seed derivation.
//!
//! Every parallel unit of work (chain, sample chunk, bootstrap resample)
//! draws from its own ChaCha8 stream seeded by `mix(root, index)`. Results
//! therefore depend on the root seed and the unit index only, never on the
//! worker count or the scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `root`: `splitmix64(splitmix64(root) ^ index * GOLDEN)`.
#[inline]
pub fn mix(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ index.wrapping_mul(GOLDEN))
}

/// Independent stream `index` derived from `root`.
pub fn stream(root: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix(root, index))
}

/// Sub-stream used when one unit of work needs a further split
/// (e.g. stream `j` inside chain `i`).
pub fn substream(root: u64, index: u64, sub: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix(mix(root, index), sub))
}
