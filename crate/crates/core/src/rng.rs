//! Named, counter-derived random substreams.
//!
//! Every random draw in an experiment comes from a stream whose seed is a
//! hash of `(master seed, purpose label, indices)`. Two consumers asking for
//! the same key get the same stream regardless of what else has been drawn,
//! which is what keeps methods paired on identical channels and pilots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Generator used for all simulation randomness.
pub type SimRng = ChaCha8Rng;

/// Stream purposes used by the experiment drivers.
pub mod label {
    pub const CHANNEL: &str = "channel";
    pub const PILOTS: &str = "pilots";
    pub const EVAL: &str = "eval";
    pub const INIT: &str = "init";
    pub const TASK_SAMPLING: &str = "task-sampling";
    pub const QPSK_PILOTS: &str = "qpsk-pilots";
    pub const CONSTELLATION: &str = "constellation";
}

/// Derive the substream for `(master, label, indices)`.
pub fn substream(master: u64, label: &str, indices: &[u64]) -> SimRng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for idx in indices {
        hasher.update(idx.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    SimRng::from_seed(seed)
}

/// Key component for an SNR value, so that 5 dB and 10 dB get distinct streams.
pub fn snr_key(snr_db: f64) -> u64 {
    snr_db.to_bits()
}
