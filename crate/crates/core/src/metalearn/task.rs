use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cae::{Message, PilotSample};
use crate::channel::{ComplexBlock, NoiseModel};
use crate::error::{Error, Result};

/// Pilot data observed on one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub h: ComplexBlock,
    pub support: Vec<PilotSample>,
    pub query: Vec<PilotSample>,
    pub sigma2: f64,
}

impl Task {
    /// Short content hash over the channel, labels and noise draws.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.h.to_le_bytes());
        hasher.update(self.sigma2.to_le_bytes());
        for s in self.support.iter().chain(&self.query) {
            hasher.update((s.message.get() as u64).to_le_bytes());
            hasher.update(s.noise_draw.to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..8])
    }

    /// Support and query pilots together.
    pub fn all_pilots(&self) -> Vec<PilotSample> {
        self.support.iter().chain(&self.query).cloned().collect()
    }
}

/// Draw pilot noise for `shots` support and `query_shots` query samples per
/// message. Support draws for all messages come first, then query draws.
pub fn make_pilot_task<R: Rng + ?Sized>(
    h: &ComplexBlock,
    sigma2: f64,
    shots: usize,
    query_shots: usize,
    k: u32,
    rng: &mut R,
) -> Result<Task> {
    if shots == 0 {
        return Err(Error::config("shots", "must be >= 1"));
    }
    let noise = NoiseModel::new(sigma2)?;
    let n = h.n();
    let messages = 1usize << k;
    let mut draw = |per_message: usize| -> Vec<PilotSample> {
        let mut out = Vec::with_capacity(messages * per_message);
        for m in 0..messages {
            for _ in 0..per_message {
                out.push(PilotSample {
                    message: Message::from_index(m),
                    noise_draw: noise.sample(n, rng),
                });
            }
        }
        out
    };
    let support = draw(shots);
    let query = draw(query_shots);
    Ok(Task {
        h: h.clone(),
        support,
        query,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn counts_per_message() {
        let h = ComplexBlock::from_pairs(&[(1.0, 0.0)]);
        let t = make_pilot_task(&h, 0.1, 1, 1, 2, &mut substream(0, "t", &[])).unwrap();
        assert_eq!(t.support.len(), 4);
        assert_eq!(t.query.len(), 4);
        let h2 = ComplexBlock::from_pairs(&[(1.0, 0.0), (0.0, 1.0)]);
        let t = make_pilot_task(&h2, 0.1, 5, 5, 4, &mut substream(0, "t", &[])).unwrap();
        assert_eq!(t.support.len(), 80);
        for m in 1..=16 {
            assert_eq!(t.support.iter().filter(|s| s.message.get() == m).count(), 5);
        }
        assert!(t.support.iter().all(|s| s.noise_draw.n() == 2));
    }

    #[test]
    fn deterministic_given_stream() {
        let h = ComplexBlock::from_pairs(&[(0.3, 0.4)]);
        let a = make_pilot_task(&h, 0.5, 2, 2, 2, &mut substream(9, "t", &[])).unwrap();
        let b = make_pilot_task(&h, 0.5, 2, 2, 2, &mut substream(9, "t", &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn zero_shots_rejected() {
        let h = ComplexBlock::from_pairs(&[(1.0, 0.0)]);
        assert!(make_pilot_task(&h, 0.1, 0, 1, 2, &mut substream(0, "t", &[])).is_err());
    }
}
