//! Deterministic random streams derived from one global seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used across the crate so that curve synthesis, trace
/// generation and instance sampling never share random draws.
pub mod streams {
    pub const CURVE: u64 = 1;
    pub const TRACE: u64 = 2;
    pub const INSTANCE: u64 = 3;
}

/// Independent generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
