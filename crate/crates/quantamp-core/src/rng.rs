//! Deterministic stream splitting for parallel Monte Carlo.
//!
//! Every random draw in this workspace comes from a ChaCha8 stream addressed
//! by `(master seed, domain, index)`. The domain separates independent uses
//! (channel frames, evaluation sets, policy init, ...) and the index selects
//! the ChaCha stream, so frame `i` produces the same data whether frames are
//! generated sequentially or in parallel, in any order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent top-level uses of the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// BER-sweep frame simulation.
    Sweep = 1,
    /// Frozen evaluation set of the bitwidth-search environment.
    EvalSet = 2,
    /// Reference-BER precomputation.
    RefBer = 3,
    /// Per-evaluation resampled frames.
    EvalResample = 4,
    /// Policy/value network initialisation.
    NetInit = 5,
    /// Action sampling during training.
    Agent = 6,
    /// Environment randomness (variable extraction, next-variable draws).
    Env = 7,
    /// Trace collection for integral-bitwidth statistics.
    Trace = 8,
    /// Bitwidth estimation (testing phase) action sampling.
    Testing = 9,
}

/// SplitMix64 finalizer; decorrelates structured seed inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for stream `index` of `domain` under `master`.
pub fn stream_rng(master: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ ((domain as u64) << 56)));
    rng.set_stream(index);
    rng
}
