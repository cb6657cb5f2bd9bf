//! Seeded random streams.
//!
//! Every draw goes through ChaCha20 (`rand_chacha`), whose output is fully
//! specified and identical across platforms. A `(seed, stream)` pair selects
//! an independent keystream: the seed is expanded into the key with
//! `SeedableRng::seed_from_u64` and the stream id is written into ChaCha's
//! 64-bit stream (nonce) word. Trial `t` of an experiment seeded with `s`
//! uses seed `s ^ t`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Role of a random stream within one market draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    ParetoR = 0,
    ParetoH = 1,
    Returns = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}
