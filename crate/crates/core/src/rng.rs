//! Deterministic random streams.
//!
//! Each Monte Carlo sample or detection trial draws from its own ChaCha
//! stream keyed by `(seed, index)`, so a parallel run reproduces a serial one
//! exactly no matter how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
