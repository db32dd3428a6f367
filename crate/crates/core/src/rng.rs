//! Deterministic random streams.
//!
//! Every random quantity in a run comes from a ChaCha8 stream addressed by
//! `(seed, agent, purpose)`. Streams are independent of the order in which
//! agents are processed, so parallel and sequential execution agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a per-agent stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Data samples fed to the stochastic oracle.
    Xi = 0,
    /// Exploration directions of the gradient estimator.
    Zeta = 1,
    /// Compressor randomness (quantizer dither, Rand-k coordinates).
    Dither = 2,
    /// Initial iterates.
    Init = 3,
}

const PURPOSES: u64 = 4;

/// Stream for one agent and purpose under a run seed.
pub fn agent_stream(seed: u64, agent: usize, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64 * PURPOSES + purpose as u64);
    rng
}

/// Plain seeded stream for construction-time randomness (graphs, families).
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
