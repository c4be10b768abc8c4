//! Seeded generators. Every parallel task derives its own stream from the
//! caller's seed so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for task `stream` under `seed`.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw converted to the scalar type.
pub(crate) fn gaussian<T: crate::Scalar>(rng: &mut Rng) -> T {
    use rand_distr::{Distribution, StandardNormal};
    let z: f64 = StandardNormal.sample(rng);
    T::of(z)
}

/// Independent 64-bit seed for sub-task `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    use rand::RngCore;
    seeded(seed, stream).next_u64()
}
