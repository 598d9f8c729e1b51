//! Deterministic RNG utilities.
//!
//! Every random stream in the crate is a `ChaCha8Rng` derived from a root
//! seed plus a list of stream identifiers, so results do not depend on the
//! order in which independent work items are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Create a deterministic RNG from a seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a root seed with stream identifiers into an independent child seed.
pub fn derive_seed(root: u64, streams: &[u64]) -> u64 {
    streams
        .iter()
        .fold(splitmix64(root), |acc, &s| splitmix64(acc ^ splitmix64(s.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// RNG for a child stream of `root`.
pub fn child_rng(root: u64, streams: &[u64]) -> SimRng {
    seeded_rng(derive_seed(root, streams))
}
