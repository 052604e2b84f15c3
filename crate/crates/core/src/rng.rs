//! Seed derivation and the crate's deterministic generator.
//!
//! Every random draw goes through [`SeededRng`] (ChaCha20, a counter-based
//! stream cipher), so a seed fixes the output bits regardless of thread count
//! or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SeededRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices (grid point, trial, ...) into a
/// child seed. Distinct paths give statistically independent streams.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_path_sensitive() {
        let a = derive_seed(7, &[0, 1]);
        let b = derive_seed(7, &[1, 0]);
        let c = derive_seed(8, &[0, 1]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[0, 1]));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut r1 = rng_from_seed(42);
        let mut r2 = rng_from_seed(42);
        let x: Vec<u64> = (0..8).map(|_| r1.random()).collect();
        let y: Vec<u64> = (0..8).map(|_| r2.random()).collect();
        assert_eq!(x, y);
    }
}
