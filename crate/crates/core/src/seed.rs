//! Child-seed derivation.
//!
//! Every random stream in an experiment is keyed by a path of integers
//! (master seed, model, horizon, replication, rule) so that replications can
//! run in any order and still see the same randomness.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `parent` and a `tag`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix(mix(parent ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Folds a sequence of tags into a single seed.
pub fn derive_path(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(parent, |seed, &tag| derive_seed(seed, tag))
}
