//! Seeded random streams.
//!
//! Every randomized routine takes an explicit [`DpRng`]. Independent parts of a
//! computation draw from independent substreams derived from a base seed and a
//! key path, so parallel trials never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type DpRng = ChaCha12Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a key path.
pub fn hash_keys(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x6a09_e667_f3bc_c909, |acc, &k| mix64(acc ^ mix64(k)))
}

/// Generator seeded from `seed`.
pub fn seeded(seed: u64) -> DpRng {
    DpRng::seed_from_u64(seed)
}

/// Independent substream of `seed` selected by `keys`.
pub fn substream(seed: u64, keys: &[u64]) -> DpRng {
    let mut rng = DpRng::seed_from_u64(seed);
    rng.set_stream(hash_keys(keys));
    rng
}

/// Hash of an arbitrary label, for use as a substream key.
pub fn label_key(label: &str) -> u64 {
    // FNV-1a, then mixed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h)
}
