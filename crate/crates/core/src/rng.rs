//! Seeded random streams. One root seed fans out into independent
//! per-episode streams so episodes can be replayed or run out of order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn root_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` under `root`. Streams never overlap for distinct indices.
pub fn episode_rng(root: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}
