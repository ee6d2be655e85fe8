//! Seed derivation.
//!
//! Every random draw in a run is keyed by the master seed plus a short path of
//! counters (purpose tag, step, phase, epoch, ...). Each path element is folded
//! in with a SplitMix64 finalizer, so sibling streams never share state and the
//! draw for one epoch does not depend on how many draws happened before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags used as the first path element.
pub mod tag {
    pub const INIT: u64 = 0x01;
    pub const EXPAND: u64 = 0x02;
    pub const SHUFFLE: u64 = 0x03;
    pub const DROPOUT: u64 = 0x04;
    pub const EXEMPLAR: u64 = 0x05;
    pub const MASK: u64 = 0x06;
    pub const SPLIT: u64 = 0x07;
    pub const DATA: u64 = 0x08;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a counter path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    rng(derive(master, path))
}
