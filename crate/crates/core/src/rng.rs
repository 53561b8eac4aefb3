//! Seeded randomness. Every generator in the crate takes an explicit seed and
//! builds its own stream from it; there is no shared global RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a list of labelled components.
///
/// Stable across platforms and compiler versions, unlike `std`'s hashers.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Encodes a real-valued grid coordinate for [`derive_seed`].
pub fn real_part(v: f64) -> u64 {
    // -0.0 and 0.0 must hash alike
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}
