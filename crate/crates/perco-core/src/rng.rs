//! Seed plumbing: every random quantity in the crate flows from one root
//! seed, split into independent substreams by fixed tags and indices.
//! There is no global RNG state anywhere.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64 output function. Fixed constants, stable across platforms.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a substream seed from a root seed and a list of tags
/// (purpose tag, probe index, trial index, ...).
pub fn substream(root: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(root);
    for &t in tags {
        s = splitmix64(s ^ t.wrapping_mul(0xd6e8_feb8_6659_fd93));
    }
    s
}

/// Deterministic stream cipher RNG for coupling samplers.
pub fn stream_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one output word.
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n` by rejection; `n` must be nonzero.
pub fn uniform_below<R: RngCore>(rng: &mut R, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % n;
        }
    }
}

/// Uniformly random subset of `{0..n}` of the given size, via a partial
/// Fisher–Yates shuffle. Returned indices are sorted.
pub fn random_subset<R: RngCore>(rng: &mut R, n: usize, size: usize) -> alloc::vec::Vec<usize> {
    debug_assert!(size <= n);
    let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = i + uniform_below(rng, (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(size);
    pool.sort_unstable();
    pool
}
