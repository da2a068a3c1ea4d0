//! Deterministic random streams.
//!
//! Every consumer of randomness (a player's signature chain, a trial's
//! initial conditions, the cyber player's exploration) gets its own ChaCha
//! stream keyed by the run seed and a path of integer labels, so adding or
//! removing one consumer never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream labels.
pub mod label {
    pub const INIT: u64 = 1;
    pub const CHAIN: u64 = 2;
    pub const EXPLORE: u64 = 3;
    pub const REPLAY: u64 = 4;
    pub const NETWORK: u64 = 5;
    pub const VALIDATION: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a label path.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    let key = path
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D))));
    ChaCha8Rng::seed_from_u64(key)
}
