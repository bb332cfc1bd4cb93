//! Deterministic derivation of independent generator seeds.
//!
//! A child seed is obtained by folding each tag into the parent with one
//! SplitMix64 finalization step: `s <- mix(s ^ mix(tag + GOLDEN))`.
//! Cells, trials and row-LPs each get their own stream this way, so results
//! do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator used for every random draw in the crate.
pub type Rng = ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix_finalize(parent.wrapping_add(GOLDEN)), |s, &t| {
        splitmix_finalize(s ^ splitmix_finalize(t.wrapping_add(GOLDEN)))
    })
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(parent: u64, tags: &[u64]) -> Rng {
    rng_from_seed(derive_seed(parent, tags))
}

/// Stable numeric tags for the different consumers of randomness.
pub mod tag {
    pub const KEY: u64 = 1;
    pub const CHANNEL: u64 = 2;
    pub const PROJECTOR: u64 = 3;
    pub const ROW_LP: u64 = 4;
    pub const RESAMPLE: u64 = 5;
    pub const CELL: u64 = 6;
    pub const TRIAL: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        assert_ne!(derive_seed(7, &[]), derive_seed(7, &[0]));
    }
}
