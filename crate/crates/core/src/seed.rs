//! One run seed fanned out into independent named random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub const SPLIT: &str = "split";
pub const INIT: &str = "init";
pub const SAMPLING: &str = "sampling";
pub const DROPOUT: &str = "dropout";
pub const KMEANS: &str = "kmeans";
pub const SYNTH: &str = "synth";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, name: &str) -> StreamRng {
        self.rng_indexed(name, &[])
    }

    /// Stream keyed by a name plus integer coordinates (epoch, record, ...).
    pub fn rng_indexed(&self, name: &str, index: &[u64]) -> StreamRng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(name.as_bytes());
        for i in index {
            h.update(b"/");
            h.update(i.to_le_bytes());
        }
        let digest: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(digest)
    }
}
