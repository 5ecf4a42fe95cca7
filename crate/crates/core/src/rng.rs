//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a root seed
//! mixed with stream identifiers (node index, detection index, quantized pose).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::se2::Pose2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(root: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, parts))
}

/// Pose quantized to micrometres / microradians, as seed material.
pub fn quantize_pose(p: &Pose2) -> [u64; 3] {
    let q = |v: f64| (v * 1e6).round() as i64 as u64;
    [q(p.x), q(p.y), q(p.theta())]
}
