//! Seeded random streams.
//!
//! Every stochastic operation draws from its own [`Stream`], a ChaCha8
//! generator seeded from a `u64`. Child seeds are derived from a parent seed
//! and a purpose label with [`derive_seed`]: the label is hashed with 64-bit
//! FNV-1a, xored into the parent, and the result is passed through one round
//! of the SplitMix64 finalizer. Both the generator and the derivation are
//! fixed; golden values in the test suite depend on them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a named purpose ("dataset", "init", "channel", ...).
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ fnv1a(label))
}

/// Child seed for the `index`-th item of a named purpose.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(parent, label) ^ splitmix64(index))
}
