//! Deterministic seed derivation.
//!
//! Every random stream is keyed by the run seed plus a tag and indices, mixed
//! with SplitMix64. Streams never depend on scheduling order, so parallel
//! generation produces the same bytes as sequential generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_PROBLEM: u64 = 0x5052_4f42; // "PROB"
pub const TAG_EPISODE: u64 = 0x4550_4953; // "EPIS"
pub const TAG_AGENT: u64 = 0x4147_4e54; // "AGNT"

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `splitmix64` folded over `base` and each element of `stream`.
pub fn derive(base: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(splitmix64(base), |acc, &v| splitmix64(acc ^ splitmix64(v)))
}

pub fn problem_seed(seed: u64, problem_index: usize) -> u64 {
    derive(seed, &[TAG_PROBLEM, problem_index as u64])
}

pub fn episode_seed(seed: u64, problem_index: usize, episode_index: usize) -> u64 {
    derive(seed, &[TAG_EPISODE, problem_index as u64, episode_index as u64])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
