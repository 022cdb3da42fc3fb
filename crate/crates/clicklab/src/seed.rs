//! Deterministic sub-seed derivation.
//!
//! Every random stream in the crate (world generation, search streams, tie
//! breaking, click draws, oracle batches) is keyed by a 64-bit seed derived
//! from a parent seed and an integer tag. Derivation is a pure function, so
//! replications and per-search jobs can run on any number of threads and the
//! results stay identical.
//!
//! Scheme: `derive_seed(base, tag) = splitmix64(base ^ splitmix64(tag + C))`
//! with the splitmix64 finalizer. Chains of `derive_seed` calls give nested
//! streams, e.g. `derive_seed(derive_seed(cell, search_index), 1)` for the
//! click draws of one search.

const TAG_SALT: u64 = 0xa076_1d64_78bd_642f;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the child seed for stream `tag` of the stream keyed by `base`.
#[inline]
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag.wrapping_add(TAG_SALT)))
}
