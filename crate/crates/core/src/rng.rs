//! Seeded random streams.
//!
//! Every consumer of randomness gets its own stream derived from
//! `(seed, purpose, index)`, so changing how much one subsystem draws never
//! shifts another subsystem's samples. Experiment comparisons across policies
//! and `sigma1` values rely on this.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purposes of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    World = 1,
    Attributes = 2,
    Drift = 3,
    Keyframes = 4,
    Walk = 5,
    PointNoise = 6,
    Policy = 7,
    Network = 8,
    Replay = 9,
    /// Episode seeds used while training.
    Training = 10,
    /// Episode seeds shared by every evaluated policy.
    Evaluation = 11,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stream seed from a base seed, a purpose and an index (agent id, episode, ...).
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ (stream as u64)) ^ index)
}

pub fn stream(seed: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}
