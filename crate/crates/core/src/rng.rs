//! Counter-based seeding.
//!
//! Every record and trial owns an independent stream derived from a base seed
//! and its index, so generation order (or worker count) never changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Seed of record `index` under `base`.
pub fn record_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Derives an independent base seed for a named sub-stream (train split,
/// test split, evaluation trials at a given SNR, ...).
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x51_7c_c1_b7_27_22_0a_95)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) mod streams {
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const DOA_TRIALS: u64 = 3;
    pub const SPECTRUM: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
}
