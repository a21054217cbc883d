//! Counter-style random streams: every (seed, key) pair maps to its own
//! ChaCha stream, so draws do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the stream identified by `key` under the master `seed`.
pub fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(key.len() as u64);
    for &k in key {
        h = splitmix(h ^ k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}
