//! Named, independent random streams derived from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream identifiers. Each component draws from its own stream so that
/// changing how one component consumes randomness leaves the others intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Mask = 1,
    Init = 2,
    Train = 3,
    Sample = 4,
    Split = 5,
    Oracle = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Per-item stream within a component, for order-independent parallel work.
pub fn item_rng(seed: u64, stream: Stream, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(item);
    rng
}
