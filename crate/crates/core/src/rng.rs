//! Counter-based random streams.
//!
//! Every replica, block or worker gets its own ChaCha8 stream keyed by
//! `(seed, stream id)`, so results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids are `(purpose << 48) | index`; purposes keep the streams of
/// different stages of one experiment apart.
pub const PURPOSE_SHIFT: u32 = 48;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn purpose_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << PURPOSE_SHIFT);
    stream_rng(seed, (purpose << PURPOSE_SHIFT) | index)
}
