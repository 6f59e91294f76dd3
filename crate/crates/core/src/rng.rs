//! Deterministic per-replica random streams.
//!
//! Every replica draws from its own ChaCha8 stream selected by
//! `(master_seed, index)`, so results never depend on how replicas are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(master_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
