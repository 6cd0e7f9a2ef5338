//! Reproducible random streams.
//!
//! Every stochastic input of a trajectory draws from its own ChaCha stream
//! whose key is a SHA-256 digest of `(master seed, trajectory id, stream name)`.
//! Results therefore do not depend on how trajectories are scheduled across
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream generator type used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Stream names used by the oscillator model; kept in one place so that the
/// reference and physical modes share driving noises.
pub mod names {
    pub const B1: &str = "B1";
    pub const B2: &str = "B2";
    pub const LASER: &str = "B3";
    pub const LOCAL_OSC: &str = "B4";
    pub const COUNTS: &str = "N";
    pub const THINNING: &str = "thinning";

    pub fn channel(index: usize) -> String {
        format!("B{}", index + 5)
    }

    pub fn channel_aux(index: usize) -> String {
        format!("B{}-aux", index + 5)
    }
}

/// Derives the 32-byte key of a named stream.
pub fn stream_key(seed: u64, trajectory: u64, name: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"qtraj/stream/v1");
    hasher.update(seed.to_le_bytes());
    hasher.update(trajectory.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

/// Opens the named stream of one trajectory.
pub fn stream(seed: u64, trajectory: u64, name: &str) -> StreamRng {
    StreamRng::from_seed(stream_key(seed, trajectory, name))
}

/// Bundle of stream coordinates for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySeed {
    pub seed: u64,
    pub trajectory: u64,
}

impl TrajectorySeed {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self { seed, trajectory }
    }

    pub fn stream(&self, name: &str) -> StreamRng {
        stream(self.seed, self.trajectory, name)
    }
}
