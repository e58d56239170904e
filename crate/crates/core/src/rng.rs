//! Seeded, order-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A stream keyed by a base seed and a path of sub-keys, so that e.g. each
/// sample, epoch or stage draws from its own generator.
pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for &k in keys {
        h = splitmix(h ^ splitmix(k));
    }
    ChaCha8Rng::seed_from_u64(h)
}
