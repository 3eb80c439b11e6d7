//! Counter-based seed splitting.
//!
//! Every random quantity in the simulator is drawn from a ChaCha stream
//! keyed by a master seed and a path of integers (domain tag, user, trial,
//! ...). Streams never depend on scheduling order, so Monte Carlo runs are
//! bit-identical regardless of how many worker threads execute them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep unrelated draws on disjoint streams.
pub mod domain {
    pub const HOP_CODE: u64 = 1;
    pub const CHANNEL: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const BITS: u64 = 4;
    pub const STATISTIC: u64 = 5;
    pub const FRAME: u64 = 6;
    pub const SNN_INIT: u64 = 7;
    pub const SNN_SHUFFLE: u64 = 8;
    pub const DATASET: u64 = 9;
    pub const TRIAL: u64 = 10;
    pub const FINE_TUNE: u64 = 11;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 256-bit key from `seed` and `path`.
pub fn derive_key(seed: u64, path: &[u64]) -> [u8; 32] {
    let mut state = splitmix(seed);
    for &p in path {
        state = splitmix(state ^ splitmix(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Independent RNG for the substream `(seed, path)`.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(seed, path))
}
