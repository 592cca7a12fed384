//! Seeded sampling plans.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How a law is checked: over every element, or over seeded random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePlan {
    Exhaustive,
    Random { count: usize, seed: u64 },
}

impl SamplePlan {
    pub fn random(count: usize, seed: u64) -> Self {
        SamplePlan::Random { count, seed }
    }
}

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
