//! Deterministic seeding.
//!
//! Every random stream in the engine is a [`Pcg64Mcg`](rand_pcg::Pcg64Mcg)
//! derived from one root seed and a textual label, so a run is reproducible
//! bit-for-bit from `(root seed, label)` pairs regardless of thread
//! scheduling or platform.

use rand::SeedableRng;

/// The one PRNG used everywhere: portable, integer-seeded, fast.
pub type Rng = rand_pcg::Pcg64Mcg;

/// Derive a child seed from a root seed and a label (FNV-1a over both).
pub fn split(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in root.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// A fresh generator for `(root, label)`.
pub fn rng(root: u64, label: &str) -> Rng {
    Rng::seed_from_u64(split(root, label))
}
