//! One (seed, SNR, shots) cell of an experiment: the fading sequence, the
//! per-sequence pilot tasks and the random streams every method shares.

use crate::cae::CaeArch;
use crate::channel::{ComplexBlock, FadingProcess, NoiseModel};
use crate::error::{Error, Result};
use crate::metalearn::{make_pilot_task, Task};
use crate::rng::{label, snr_key, substream, SimRng};

#[derive(Debug, Clone)]
pub struct Scenario {
    arch: CaeArch,
    seed: u64,
    snr_db: f64,
    shots: usize,
    query_shots: usize,
    n_eval: usize,
    noise: NoiseModel,
    channels: Vec<ComplexBlock>,
}

impl Scenario {
    /// The channel sequence depends only on `seed`, so every SNR and shot
    /// count sees the same fading realizations.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        arch: CaeArch,
        seed: u64,
        snr_db: f64,
        shots: usize,
        query_shots: usize,
        n_eval: usize,
        n_sequences: usize,
        rho: f64,
    ) -> Result<Self> {
        let noise = NoiseModel::from_snr_db(snr_db);
        Self::with_noise(arch, seed, snr_db, noise, shots, query_shots, n_eval, n_sequences, rho)
    }

    /// Same as [`Scenario::new`] with an explicit noise model.
    #[allow(clippy::too_many_arguments)]
    pub fn with_noise(
        arch: CaeArch,
        seed: u64,
        snr_db: f64,
        noise: NoiseModel,
        shots: usize,
        query_shots: usize,
        n_eval: usize,
        n_sequences: usize,
        rho: f64,
    ) -> Result<Self> {
        if shots == 0 {
            return Err(Error::config("shots", "must be >= 1"));
        }
        if query_shots == 0 {
            return Err(Error::config("query_shots", "must be >= 1"));
        }
        if n_eval == 0 {
            return Err(Error::config("n_eval", "must be >= 1"));
        }
        if n_sequences == 0 {
            return Err(Error::config("n_sequences", "must be >= 1"));
        }
        let mut fading = FadingProcess::new(rho, arch.n_ch(), substream(seed, label::CHANNEL, &[]))?;
        let channels = fading.take_blocks(n_sequences);
        Ok(Self {
            arch,
            seed,
            snr_db,
            shots,
            query_shots,
            n_eval,
            noise,
            channels,
        })
    }

    pub fn arch(&self) -> &CaeArch {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn n_eval(&self) -> usize {
        self.n_eval
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn n_sequences(&self) -> usize {
        self.channels.len()
    }

    /// Channel of sequence `i` (1-based).
    pub fn channel(&self, i: usize) -> &ComplexBlock {
        &self.channels[i - 1]
    }

    fn key(&self, i: usize) -> [u64; 3] {
        [snr_key(self.snr_db), self.shots as u64, i as u64]
    }

    /// Pilot task of sequence `i`; identical for every method.
    pub fn task(&self, i: usize) -> Result<Task> {
        let mut rng = substream(self.seed, label::PILOTS, &self.key(i));
        make_pilot_task(
            self.channel(i),
            self.noise.sigma2(),
            self.shots,
            self.query_shots,
            self.arch.k(),
            &mut rng,
        )
    }

    pub fn eval_rng(&self, i: usize) -> SimRng {
        substream(self.seed, label::EVAL, &self.key(i))
    }

    pub fn init_rng(&self, i: usize) -> SimRng {
        substream(self.seed, label::INIT, &self.key(i))
    }

    pub fn sampling_rng(&self, i: usize) -> SimRng {
        substream(self.seed, label::TASK_SAMPLING, &self.key(i))
    }

    pub fn qpsk_pilot_rng(&self, i: usize) -> SimRng {
        substream(self.seed, label::QPSK_PILOTS, &self.key(i))
    }
}
