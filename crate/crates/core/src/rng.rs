//! Reproducible random substreams.
//!
//! Every run draws from its own ChaCha8 stream: the master seed keys the
//! generator and the run index selects the 64-bit stream id, so run `i` sees the
//! same numbers no matter which thread executes it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomSource {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Substream for run `index` under the same master seed.
    pub fn substream(&self, index: u64) -> Self {
        Self::new(self.master_seed, index)
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform(rng: &mut SimRng) -> f64 {
    rng.gen::<f64>()
}
