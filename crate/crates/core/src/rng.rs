//! Counter-based random streams.
//!
//! Monte Carlo work is cut into fixed-size blocks. Block `k` draws from a
//! ChaCha8 generator keyed by the run seed with stream id `k`, so results
//! depend only on `(seed, block)` and never on how blocks are scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Paths per block.
pub const BLOCK: usize = 512;

/// Generator for one block.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Derives an independent seed for a named sub-experiment.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `per_path` for `n` paths in parallel blocks and returns the
/// outputs in path order.
pub fn par_paths<T, F>(n: usize, seed: u64, per_path: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| per_path(&mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Like [`par_paths`] but hands each block a scratch value built by `init`.
pub fn par_paths_with<T, S, I, F>(n: usize, seed: u64, init: I, per_path: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut ChaCha8Rng, &mut S) -> T + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let mut scratch = init();
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| per_path(&mut rng, &mut scratch)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}
