//! Deterministic derivation of independent RNG streams from a master seed.
//!
//! Every stochastic step (replication `j`, posterior draw `k`, bootstrap
//! replicate `b`) gets its own generator keyed by its position, so results do
//! not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags keep generators for different purposes apart even when they
/// share an index.
pub mod tag {
    pub const REPLICATION: u64 = 1;
    pub const DATA: u64 = 2;
    pub const PSM_MATCH: u64 = 3;
    pub const MCMC: u64 = 4;
    pub const DRAW_MATCH: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a path of identifiers into a child seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(master, path))
}
