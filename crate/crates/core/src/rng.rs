//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a master
//! seed mixed with the call context (entry indices, iteration numbers, stream
//! tags). Streams never share state, so evaluation order and parallelism do not
//! affect results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used to keep independent random streams apart.
pub mod stream {
    pub const INIT: u64 = 0x494e_4954;
    pub const THETA: u64 = 0x5448_4554;
    pub const CANDIDATES: u64 = 0x4341_4e44;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const RESTARTS: u64 = 0x5245_5354;
    pub const GRAM_SAME: u64 = 0x4753_414d;
    pub const GRAM_CROSS: u64 = 0x4743_5253;
    pub const SHOTS: u64 = 0x5348_4f54;
    pub const DATA: u64 = 0x4441_5441;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with an ordered list of context words.
pub fn derive_seed(master: u64, context: &[u64]) -> u64 {
    context
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_from(master: u64, context: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, context))
}
