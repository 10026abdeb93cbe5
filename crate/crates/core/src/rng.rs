//! Deterministic `(seed, stream)` random streams.
//!
//! Every random quantity of an instance draws from its own ChaCha stream, so a
//! replicate is a pure function of its seed no matter which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SIGNAL: u64 = 1;
pub const STREAM_DESIGN: u64 = 2;
pub const STREAM_NOISE: u64 = 3;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
