//! Seeded random streams.
//!
//! Every experiment owns one 64-bit seed. Parallel shard `k` draws from
//! ChaCha8 stream `k` of that seed, so results are identical whatever the
//! thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for shard `k` of the experiment seeded with `seed`.
pub fn shard(seed: u64, k: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}
