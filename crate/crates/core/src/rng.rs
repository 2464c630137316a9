//! Random streams.
//!
//! Every chain owns a `ChaCha8Rng` seeded from a 64-bit seed. Independent
//! streams for replications or parallel chains use
//! `seed ^ splitmix64(index)`, so any single replication can be rerun on its
//! own. The mixing function is part of the output contract and must not change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// The splitmix64 finalizer.
pub fn splitmix64(index: u64) -> u64 {
    let mut z = index.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ splitmix64(index)
}

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}
