use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible uniform stream keyed by `(seed, replica)`.
///
/// Replicas share the ChaCha key derived from `seed` and differ in the
/// stream id, so parallel replicas never overlap and can be regenerated
/// independently.
#[derive(Debug, Clone)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        Self(rng)
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}
