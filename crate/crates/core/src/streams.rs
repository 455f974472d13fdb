//! Named random sub-streams derived from the single root seed.
//!
//! Every source of randomness in a run draws from its own ChaCha stream:
//! identical key (the root seed), distinct stream id. Streams never interact,
//! so e.g. changing the run length or the trait bounds cannot shift the news
//! realization, and two runs that share a seed see the same news path even
//! with different model parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Per-agent trait draws (c1, c2, c3), in agent order.
pub const STREAM_TRAITS: u64 = 1;
/// Per-agent conviction thresholds, in agent order.
pub const STREAM_THRESHOLDS: u64 = 2;
/// Public news draws, one per step.
pub const STREAM_NEWS: u64 = 3;
/// Private opinion noise, n_agents draws per step in agent order.
pub const STREAM_NOISE: u64 = 4;
/// Per-step agent visit permutations.
pub const STREAM_PERMUTATION: u64 = 5;
/// Random-topology construction.
pub const STREAM_TOPOLOGY: u64 = 6;

/// RNG for one named sub-stream of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
