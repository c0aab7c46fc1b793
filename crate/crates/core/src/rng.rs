//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every randomised stage draws from its own ChaCha8 generator whose seed is
//! derived from the master seed, a stage tag and a counter. Adding
//! rerandomisation runs or replicates therefore never perturbs the streams of
//! earlier ones, and parallel execution cannot change any result.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finaliser; full-period mixing of a 64-bit counter.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes, so distinct stage names give distinct streams.
fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the seed for stage `tag`, run/replicate `index`, from `master`.
pub fn derive_seed(master: u64, index: u64, tag: &str) -> u64 {
    master ^ splitmix64(splitmix64(index).wrapping_add(tag_hash(tag)))
}

/// A fresh generator for the given derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shorthand for `rng_from(derive_seed(..))`.
pub fn stream(master: u64, index: u64, tag: &str) -> ChaCha8Rng {
    rng_from(derive_seed(master, index, tag))
}
