//! Seeded randomness.
//!
//! Every random draw in the lab comes from [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`. Integer and float sampling are done here
//! rather than through `rand`'s distributions so that corpus, split and batch
//! order only depend on the ChaCha8 stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

/// Recorded in run reports so results can be traced to the generator.
pub const PRNG_NAME: &str = "ChaCha8Rng/seed_from_u64; splitmix64 seed mixing";

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for item `index` of a stream keyed by `seed`
/// (splitmix64 finalizer over `seed ^ golden * (index + 1)`).
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn unit(rng: &mut LabRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Unbiased integer in `0..n` (Lemire's multiply-and-reject).
pub fn below(rng: &mut LabRng, n: usize) -> usize {
    assert!(n > 0, "below(0)");
    let n = n as u64;
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = (rng.next_u64() as u128) * (n as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as usize;
        }
    }
}

/// Fisher-Yates shuffle driven by [`below`].
pub fn shuffle<T>(rng: &mut LabRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

pub fn choose<'a, T>(rng: &mut LabRng, items: &'a [T]) -> &'a T {
    &items[below(rng, items.len())]
}
