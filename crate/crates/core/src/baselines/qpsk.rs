use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;

use crate::channel::{cmul, ComplexBlock, NoiseModel};
use crate::error::{Error, Result};

/// Gray-coded QPSK points indexed by the 2-bit value `b0 b1` (b0 is the MSB):
/// 00, 01, 10, 11.
pub const GRAY_MAP: [(f64, f64); 4] = [
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Known pilot symbol, the `00` point.
pub const PILOT: (f64, f64) = GRAY_MAP[0];

/// QPSK layout: `k` bits over `k / 2` channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpskConfig {
    k: u32,
}

impl QpskConfig {
    pub fn new(k: u32, n_ch: usize) -> Result<Self> {
        if k == 0 || !k.is_multiple_of(2) || k as usize != 2 * n_ch || k > 32 {
            return Err(Error::QpskShape { k: k as usize, n_ch });
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n_ch(&self) -> usize {
        self.k as usize / 2
    }

    /// Two bits per use, most significant pair on use 0.
    pub fn symbols(&self, message: usize) -> Vec<usize> {
        let n = self.n_ch();
        (0..n).map(|u| (message >> (2 * (n - 1 - u))) & 3).collect()
    }

    pub fn modulate(&self, message: usize) -> ComplexBlock {
        let pairs: Vec<(f64, f64)> = self.symbols(message).into_iter().map(|s| GRAY_MAP[s]).collect();
        ComplexBlock::from_pairs(&pairs)
    }
}

/// Least-squares (ML under AWGN) estimate per channel use:
/// `sum(conj(x) y) / sum(|x|^2)`.
pub fn mle_channel_estimate(pilot_tx: &[ComplexBlock], pilot_rx: &[ComplexBlock]) -> Result<ComplexBlock> {
    if pilot_tx.len() != pilot_rx.len() {
        return Err(Error::DimensionMismatch {
            context: "pilot lists",
            expected: pilot_tx.len(),
            actual: pilot_rx.len(),
        });
    }
    let Some(first) = pilot_tx.first() else {
        return Err(Error::EmptyBatch);
    };
    let n = first.n();
    let mut num = vec![(0.0, 0.0); n];
    let mut den = vec![0.0; n];
    for (x, y) in pilot_tx.iter().zip(pilot_rx) {
        for b in [x, y] {
            if b.n() != n {
                return Err(Error::DimensionMismatch {
                    context: "pilot block",
                    expected: n,
                    actual: b.n(),
                });
            }
        }
        for u in 0..n {
            let (xr, xi) = x.get(u);
            let (p, q) = cmul((xr, -xi), y.get(u));
            num[u].0 += p;
            num[u].1 += q;
            den[u] += xr * xr + xi * xi;
        }
    }
    let mut pairs = Vec::with_capacity(n);
    for u in 0..n {
        if den[u] == 0.0 {
            return Err(Error::ZeroPilotEnergy { channel_use: u });
        }
        pairs.push((num[u].0 / den[u], num[u].1 / den[u]));
    }
    Ok(ComplexBlock::from_pairs(&pairs))
}

/// Minimum-distance symbol decision against `h_hat * s`.
fn demodulate(y: (f64, f64), h_hat: (f64, f64)) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (s, &point) in GRAY_MAP.iter().enumerate() {
        let (pr, pi) = cmul(h_hat, point);
        let d = (y.0 - pr).powi(2) + (y.1 - pi).powi(2);
        if d < best_d {
            best_d = d;
            best = s;
        }
    }
    best
}

/// Error counts from a QPSK transmission run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QpskCounts {
    pub messages: u64,
    pub message_errors: u64,
    pub bits: u64,
    pub bit_errors: u64,
}

impl QpskCounts {
    pub fn ser(&self) -> f64 {
        self.message_errors as f64 / self.messages as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

/// Send `shots` pilots per use through `h` and estimate the channel.
pub fn estimate_from_pilots<R: Rng + ?Sized>(
    h: &ComplexBlock,
    noise: &NoiseModel,
    shots: usize,
    rng: &mut R,
) -> Result<ComplexBlock> {
    if shots == 0 {
        return Err(Error::config("shots", "must be >= 1"));
    }
    let n = h.n();
    let tx = ComplexBlock::from_pairs(&vec![PILOT; n]);
    let mut txs = Vec::with_capacity(shots);
    let mut rxs = Vec::with_capacity(shots);
    for _ in 0..shots {
        let draw = noise.sample(n, rng);
        let y: Vec<(f64, f64)> = (0..n)
            .map(|u| {
                let (a, b) = cmul(h.get(u), tx.get(u));
                let (c, d) = draw.get(u);
                (a + c, b + d)
            })
            .collect();
        txs.push(tx.clone());
        rxs.push(ComplexBlock::from_pairs(&y));
    }
    mle_channel_estimate(&txs, &rxs)
}

/// Transmit `n_eval` uniform messages over `h` and detect them coherently
/// using `h_hat`.
pub fn qpsk_transmit<R: Rng + ?Sized>(
    config: QpskConfig,
    h: &ComplexBlock,
    h_hat: &ComplexBlock,
    noise: &NoiseModel,
    n_eval: usize,
    rng: &mut R,
) -> Result<QpskCounts> {
    let n = config.n_ch();
    for b in [h, h_hat] {
        if b.n() != n {
            return Err(Error::DimensionMismatch {
                context: "qpsk channel",
                expected: n,
                actual: b.n(),
            });
        }
    }
    let mut counts = QpskCounts::default();
    let messages = 1usize << config.k();
    for _ in 0..n_eval {
        let m = rng.random_range(0..messages);
        let draw = noise.sample(n, rng);
        let mut wrong_bits = 0;
        for (u, s) in config.symbols(m).into_iter().enumerate() {
            let (a, b) = cmul(h.get(u), GRAY_MAP[s]);
            let (c, d) = draw.get(u);
            let detected = demodulate((a + c, b + d), h_hat.get(u));
            wrong_bits += (detected ^ s).count_ones() as u64;
        }
        counts.messages += 1;
        counts.bits += config.k() as u64;
        counts.bit_errors += wrong_bits;
        if wrong_bits > 0 {
            counts.message_errors += 1;
        }
    }
    Ok(counts)
}

/// Message error rate of QPSK with pilot-based channel estimation. Pilots are
/// drawn from `rng` before the evaluation messages.
pub fn qpsk_mle_ser<R: Rng + ?Sized>(
    h: &ComplexBlock,
    noise: &NoiseModel,
    shots: usize,
    k: u32,
    n_eval: usize,
    rng: &mut R,
) -> Result<f64> {
    let config = QpskConfig::new(k, h.n())?;
    if n_eval == 0 {
        return Err(Error::config("n_eval", "must be >= 1"));
    }
    let h_hat = estimate_from_pilots(h, noise, shots, rng)?;
    Ok(qpsk_transmit(config, h, &h_hat, noise, n_eval, rng)?.ser())
}

/// Same as [`qpsk_mle_ser`] but the receiver knows `h` exactly.
pub fn qpsk_perfect_csi<R: Rng + ?Sized>(
    h: &ComplexBlock,
    noise: &NoiseModel,
    k: u32,
    n_eval: usize,
    rng: &mut R,
) -> Result<QpskCounts> {
    let config = QpskConfig::new(k, h.n())?;
    qpsk_transmit(config, h, h, noise, n_eval, rng)
}
