//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by the
//! run seed plus a path of integers (purpose tag, iteration, slot, ...), so
//! work can be split across threads without changing any output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags, one per consumer of randomness.
pub mod tag {
    pub const INITIAL: u64 = 1;
    pub const RESAMPLE: u64 = 2;
    pub const PERTURB: u64 = 3;
    pub const ORACLE: u64 = 4;
    pub const DIAGNOSTICS: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a path of indices.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = splitmix64(seed);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    ChaCha8Rng::seed_from_u64(key)
}
