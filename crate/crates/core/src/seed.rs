//! Seed derivation for reproducible trials.
//!
//! Every random draw in an experiment comes from a ChaCha8 stream seeded by
//! a 64-bit value. Per-trial seeds are obtained by folding coordinates into
//! the base seed with the SplitMix64 finalizer, so any sub-grid of a sweep
//! replays exactly the same instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of words into a seed.
pub fn mix(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(base), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Seed of trial `trial` in the cell identified by `cell`.
pub fn trial_seed(base: u64, cell: u64, trial: u64) -> u64 {
    mix(base, &[cell, trial])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference SplitMix64 generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn trial_seeds_differ() {
        let a = trial_seed(7, 1, 0);
        let b = trial_seed(7, 1, 1);
        let c = trial_seed(7, 2, 0);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, trial_seed(7, 1, 0));
    }
}
