//! Seeded random streams.
//!
//! Each consumer draws from its own ChaCha stream so that, for example,
//! turning HARQ on (which changes how many error draws are made) leaves the
//! channel realization untouched.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Consumers that own a dedicated substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    Channel,
    BlockErrors,
    Traffic,
}

impl StreamLabel {
    fn stream_id(self) -> u64 {
        match self {
            StreamLabel::Channel => 1,
            StreamLabel::BlockErrors => 2,
            StreamLabel::Traffic => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    label: StreamLabel,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, label: StreamLabel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label.stream_id());
        RandomStream { label, rng }
    }

    pub fn label(&self) -> StreamLabel {
        self.label
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
