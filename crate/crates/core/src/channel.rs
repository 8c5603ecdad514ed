//! Complex-baseband channel: SNR conversion, Rayleigh block fading with
//! first-order autoregressive evolution, and additive white Gaussian noise.
//!
//! SNR is Es/N0 per complex channel use against unit average transmit power.
//! Noise of total variance `sigma2` is split evenly between the real and
//! imaginary parts.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// `n` complex values stored interleaved as `(re0, im0, re1, im1, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexBlock {
    reals: Vec<f64>,
}

impl ComplexBlock {
    pub fn zeros(n: usize) -> Self {
        Self {
            reals: vec![0.0; 2 * n],
        }
    }

    pub fn from_reals(reals: Vec<f64>) -> Result<Self> {
        if !reals.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                context: "complex block (odd real count)",
                expected: reals.len() + 1,
                actual: reals.len(),
            });
        }
        Ok(Self { reals })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self {
            reals: pairs.iter().flat_map(|&(re, im)| [re, im]).collect(),
        }
    }

    /// Number of complex channel uses.
    pub fn n(&self) -> usize {
        self.reals.len() / 2
    }

    pub fn as_reals(&self) -> &[f64] {
        &self.reals
    }

    pub fn into_reals(self) -> Vec<f64> {
        self.reals
    }

    pub fn get(&self, u: usize) -> (f64, f64) {
        (self.reals[2 * u], self.reals[2 * u + 1])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.reals.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    /// Sum of `|z|^2` over all uses.
    pub fn energy(&self) -> f64 {
        self.reals.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.reals.iter().all(|v| v.is_finite())
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.reals.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

#[inline]
pub(crate) fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Total complex noise variance per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::config("sigma2", format!("must be finite and >= 0, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }

    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            sigma2: snr_to_sigma2(snr_db),
        }
    }

    pub fn noiseless() -> Self {
        Self { sigma2: 0.0 }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// One noise realization for `n` channel uses.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ComplexBlock {
        let sd = (self.sigma2 / 2.0).sqrt();
        ComplexBlock {
            reals: (0..2 * n)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }
}

/// `10^(-snr_db / 10)`; `+inf` dB maps to a noiseless channel.
pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// `n` i.i.d. circularly-symmetric complex Gaussians with unit variance.
pub fn rayleigh_sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexBlock {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    ComplexBlock {
        reals: (0..2 * n)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}

/// AR(1) Rayleigh block-fading process, `h_i = rho h_{i-1} + sqrt(1 - rho^2) h'`.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    rho: f64,
    n: usize,
    current: Option<ComplexBlock>,
    rng: SimRng,
}

impl FadingProcess {
    pub fn new(rho: f64, n: usize, rng: SimRng) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::config("rho", format!("must lie in [0, 1], got {rho}")));
        }
        if n == 0 {
            return Err(Error::config("channel_uses", "must be >= 1"));
        }
        Ok(Self {
            rho,
            n,
            current: None,
            rng,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn current(&self) -> Option<&ComplexBlock> {
        self.current.as_ref()
    }

    /// Advance to the next block and return its coefficients. The first call
    /// draws from the stationary distribution.
    pub fn ar_step(&mut self) -> ComplexBlock {
        let fresh = rayleigh_sample(&mut self.rng, self.n);
        let next = match &self.current {
            None => fresh,
            Some(prev) => {
                let innov = (1.0 - self.rho * self.rho).sqrt();
                ComplexBlock {
                    reals: prev
                        .reals
                        .iter()
                        .zip(&fresh.reals)
                        .map(|(p, f)| self.rho * p + innov * f)
                        .collect(),
                }
            }
        };
        self.current = Some(next.clone());
        next
    }

    /// The first `count` blocks of the process.
    pub fn take_blocks(&mut self, count: usize) -> Vec<ComplexBlock> {
        (0..count).map(|_| self.ar_step()).collect()
    }
}

/// `y = h * x + noise_draw`, per channel use, with a caller-supplied noise realization.
pub fn apply_channel_with_noise(
    h: &ComplexBlock,
    x: &ComplexBlock,
    noise_draw: &ComplexBlock,
) -> Result<ComplexBlock> {
    for (context, other) in [("channel input", x), ("noise draw", noise_draw)] {
        if other.n() != h.n() {
            return Err(Error::DimensionMismatch {
                context,
                expected: h.n(),
                actual: other.n(),
            });
        }
    }
    let mut reals = Vec::with_capacity(2 * h.n());
    for u in 0..h.n() {
        let (re, im) = cmul(h.get(u), x.get(u));
        let (nr, ni) = noise_draw.get(u);
        reals.push(re + nr);
        reals.push(im + ni);
    }
    Ok(ComplexBlock { reals })
}

/// `y = h * x + n` with fresh noise; also returns the realized noise so it can be replayed.
pub fn apply_channel<R: Rng + ?Sized>(
    h: &ComplexBlock,
    x: &ComplexBlock,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<(ComplexBlock, ComplexBlock)> {
    if x.n() != h.n() {
        return Err(Error::DimensionMismatch {
            context: "channel input",
            expected: h.n(),
            actual: x.n(),
        });
    }
    let draw = noise.sample(h.n(), rng);
    let y = apply_channel_with_noise(h, x, &draw)?;
    Ok((y, draw))
}
