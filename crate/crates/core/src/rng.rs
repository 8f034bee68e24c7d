//! Named random substreams derived from one root seed.
//!
//! Every consumer of randomness asks for its own stream by name, so adding a
//! new consumer never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream `name` of the generator seeded with `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}
