//! Seeded random streams.
//!
//! Every sampler draws from one master seed split into independent ChaCha
//! streams, one per purpose. Two samplers that consume the proposal and
//! uniform streams identically therefore see the same proposals and the
//! same uniforms, which is what the shared-randomness equivalence tests rely
//! on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Proposal = 1,
    Uniform = 2,
    Subsample = 3,
    Noise = 4,
    Auxiliary = 5,
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// The per-purpose generators of one chain.
#[derive(Debug, Clone)]
pub struct Streams {
    pub proposal: ChaCha8Rng,
    pub uniform: ChaCha8Rng,
    pub subsample: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub auxiliary: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            proposal: stream(seed, Purpose::Proposal),
            uniform: stream(seed, Purpose::Uniform),
            subsample: stream(seed, Purpose::Subsample),
            noise: stream(seed, Purpose::Noise),
            auxiliary: stream(seed, Purpose::Auxiliary),
        }
    }
}
