//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 stream: the seed selects the
//! key, the stream id selects the nonce, and the word position is the
//! counter. A value therefore depends only on `(seed, stream, position)`,
//! never on how many other streams were consumed before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// FNV-1a, used to turn consumer names into stream ids.
pub fn stream_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Named sub-stream of `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// Per-trajectory generator; the `k`-th draw is the value at counter `k`.
#[derive(Clone)]
pub struct TrajectoryStream {
    rng: ChaCha8Rng,
}

impl TrajectoryStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory);
        TrajectoryStream { rng }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        unit(self.rng.next_u64())
    }
}

/// Random access into a trajectory stream.
pub fn uniform_at(seed: u64, trajectory: u64, step: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng.set_word_pos(2 * step as u128);
    unit(rng.next_u64())
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
