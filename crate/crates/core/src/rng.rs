//! Seeded random streams.
//!
//! Every consumer of randomness asks for its own child stream, keyed by a
//! purpose label such as `"heisenberg_fields"` or `"node/3"`. The child seed
//! is `splitmix64(master ^ fnv1a64(label))`, and the stream itself is a
//! ChaCha8 generator seeded from that 64-bit value. Two runs with the same
//! master seed therefore draw identical numbers regardless of the order in
//! which streams are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a64(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the child stream for `label` under `master`.
pub fn child_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a64(label))
}

/// Independent generator for one purpose.
pub fn stream(master: u64, label: &str) -> StreamRng {
    StreamRng::seed_from_u64(child_seed(master, label))
}
