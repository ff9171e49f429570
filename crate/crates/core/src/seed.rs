//! Seed expansion. Every random stream in a run is derived from one root
//! seed with [`split`], so a run is reproducible from that single number.
//!
//! `split(root, k)` is the `(k+1)`-th output of a SplitMix64 generator whose
//! state starts at `root`. Nested streams are derived by splitting again,
//! e.g. `split(split(root, purpose::EVAL), seed_index)`.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream identifiers used by the command-line tool.
pub mod purpose {
    pub const EVAL: u64 = 0;
    pub const DISTILL_INIT: u64 = 1;
    pub const DISTILL_SHUFFLE: u64 = 2;
    pub const GEN: u64 = 3;
    pub const WEIGHTS: u64 = 4;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn split(root: u64, k: u64) -> u64 {
    mix64(root.wrapping_add(GAMMA.wrapping_mul(k.wrapping_add(1))))
}

/// `n` child seeds `split(root, 0..n)`.
pub fn split_n(root: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| split(root, k)).collect()
}
