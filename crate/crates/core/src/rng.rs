//! Seeded random streams.
//!
//! Every random draw in a run comes from a ChaCha20 generator keyed by the
//! user seed, with the stage selected by the ChaCha stream id:
//!
//! | stream  | stage                                   |
//! |---------|-----------------------------------------|
//! | 0       | reduced space, first conditioning attempt |
//! | 1       | categorical sampling of the output      |
//! | i + 1   | reduced space, conditioning attempt i (i >= 1) |
//! | 2^32    | neighbor records drawn by audits        |
//!
//! Streams are independent keystreams of the same key, so stages never share
//! randomness and any stage can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

pub const STREAM_SLOTS: u64 = 0;
pub const STREAM_SAMPLING: u64 = 1;
pub const STREAM_AUDIT: u64 = 1 << 32;

/// Stream id used for the reduced-space draw of conditioning attempt `attempt` (zero based).
pub fn slot_stream(attempt: usize) -> u64 {
    if attempt == 0 {
        STREAM_SLOTS
    } else {
        attempt as u64 + 1
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Where a piece of randomness came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SeedTrail {
    pub seed: u64,
    pub stream: u64,
}
