//! Seeded random streams.
//!
//! Every consumer of randomness asks for a stream keyed by a master seed, a
//! purpose tag and a list of indices (iteration, rollout, cell, trial ...).
//! Streams never depend on the order in which they are requested, which is
//! what keeps parallel sweeps reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `(master, tag, indices)` into a 64-bit seed.
pub fn derive_seed(master: u64, tag: &str, indices: &[u64]) -> u64 {
    // FNV-1a over the tag
    let mut tag_hash = 0xCBF2_9CE4_8422_2325u64;
    for b in tag.bytes() {
        tag_hash ^= u64::from(b);
        tag_hash = tag_hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut h = splitmix64(master ^ splitmix64(tag_hash));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(master: u64, tag: &str, indices: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, indices))
}
