//! Reproducible random streams.
//!
//! Every sampler in the crate takes either an explicit `&mut impl Rng` or a
//! `u64` seed. Parallel Monte Carlo derives one independent substream per
//! sample index from `(master seed, index)`, so results do not depend on
//! scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, used only to expand seed material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream for `(seed, stream)`; distinct pairs give
/// statistically independent ChaCha8 instances.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut a = seed;
    let mut b = stream ^ 0x6a09_e667_f3bc_c908;
    let mut state = splitmix64(&mut a) ^ splitmix64(&mut b).rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
