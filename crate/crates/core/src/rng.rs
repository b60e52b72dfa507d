//! Counter-based seed derivation. Every random stream in the crate is a
//! ChaCha8 generator keyed by a hash of (master seed, purpose tag, counters),
//! so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Stream = ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint.
pub mod tag {
    pub const INIT: u64 = 0x1157;
    pub const NOISE: u64 = 0x4e01;
    pub const EVAL_SEEDS: u64 = 0x5eed;
    pub const CENTER_EVAL: u64 = 0xce17;
    pub const ACTION: u64 = 0xac71;
    pub const SUBSAMPLE: u64 = 0x5ab5;
    pub const EPISODE: u64 = 0xe915;
    pub const SHUFFLE: u64 = 0x5f1e;
    pub const ROLLOUT: u64 = 0x1011;
    pub const REPLAY: u64 = 0x4e91;
    pub const POSTEVAL: u64 = 0x9057;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash an ordered tuple of words into one seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn stream(parts: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive(parts))
}

#[inline]
pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out {
        *x = gaussian(rng);
    }
}
