//! Seeded random streams.
//!
//! A run owns a single master seed. Every consumer (weight init, data order,
//! noise injection, plastic deformation, Hutchinson probes, ...) draws from its
//! own named substream, so adding a consumer never shifts the draws seen by
//! another one. The substream seed is
//!
//! ```text
//! splitmix64(master ^ fnv1a64(name))
//! ```
//!
//! and the generator is ChaCha8 seeded from that value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SalRng = ChaCha8Rng;

pub const STREAM_INIT: &str = "init";
pub const STREAM_DATA: &str = "data";
pub const STREAM_NOISE: &str = "noise";
pub const STREAM_PLASTIC: &str = "plastic";
pub const STREAM_PROBES: &str = "probes";

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ fnv1a64(name.as_bytes()))
}

pub fn substream(master: u64, name: &str) -> SalRng {
    SalRng::seed_from_u64(substream_seed(master, name))
}
