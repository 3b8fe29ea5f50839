//! Seed derivation. Every random stream in a run is a ChaCha8 generator keyed
//! by `(run seed, purpose, index)`, so the order in which independent streams
//! are consumed never changes the result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for derived streams.
pub mod tag {
    pub const CELL: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const INIT: u64 = 3;
    pub const AGENT: u64 = 4;
    pub const ROLLOUT: u64 = 5;
    pub const POLICY: u64 = 6;
    pub const REMOVAL: u64 = 7;
    pub const DEMAND: u64 = 8;
    pub const CLOUD: u64 = 9;
    pub const FADING: u64 = 10;
    pub const INTERFERER: u64 = 11;
    pub const START: u64 = 12;
    pub const OUTCOME: u64 = 13;
}

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    mix(mix(mix(seed) ^ purpose.wrapping_mul(0x2545_f491_4f6c_dd1d)) ^ index)
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, purpose, index))
}
