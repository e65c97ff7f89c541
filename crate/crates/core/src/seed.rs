//! Deterministic seed-stream derivation.
//!
//! Experiments index their randomness by a path of indices, e.g.
//! `(repetition, model, noise level)` or `(class, row)`. [`derive_seed`] maps
//! `(master, path)` to a 64-bit seed with strong mixing so that streams for
//! different cells are independent and the result does not depend on the
//! order in which cells are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-avalanche mixing of a 64-bit word.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and an index path.
///
/// Deterministic and collision-resistant: paths differing in any index (or in
/// length) yield unrelated seeds. `derive_seed(m, &[])` is a mix of `m`
/// itself, so a master seed is never used directly as a stream seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &index in path {
        // Fold in the index and a position tag so [1, 2] != [2, 1] and
        // [0] != [0, 0].
        state = splitmix64(state ^ splitmix64(index.wrapping_add(0x517c_c1b7_2722_0a95)));
    }
    state
}

/// The RNG used throughout the crate for seeded draws.
pub type StreamRng = ChaCha8Rng;

/// Creates the RNG for a derived stream.
pub fn stream_rng(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
