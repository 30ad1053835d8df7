//! Seeded random streams.
//!
//! Every run uses ChaCha8 keyed by the scenario seed. Independent streams are
//! carved out of the same key with ChaCha's 64-bit stream selector: agent `i`
//! reads stream `i`, and population sampling reads [`POPULATION_STREAM`]. The
//! output is fixed by the ChaCha specification, so traces are reproducible
//! across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream used to draw utility parameters.
pub const POPULATION_STREAM: u64 = u64::MAX;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn agent_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    stream(seed, agent as u64)
}

/// Uniform draw in `[0, 1)`.
pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>()
}

/// Uniform draw in the open interval `(lo, hi)`.
pub fn open_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.sample(rand::distributions::Open01);
    lo + (hi - lo) * u
}
