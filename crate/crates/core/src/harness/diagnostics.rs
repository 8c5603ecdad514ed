use serde::Serialize;

use crate::cae::{loss, loss_and_grads, CaeArch, Message, Normalization, PilotSample};
use crate::channel::{rayleigh_sample, FadingProcess, NoiseModel};
use crate::error::Result;
use crate::numerics::{finite_diff_grad, OutputActivation};
use crate::rng::{label, substream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub k: u32,
    pub n_ch: usize,
    pub normalization: Normalization,
    pub params: usize,
    /// Largest `|a - b| / max(|a|, |b|)` over coordinates with `|g| > floor`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Compare analytic gradients against central differences on small random
/// networks and tasks.
pub fn gradient_check(eps: f64, floor: f64, seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut out = Vec::new();
    for normalization in [Normalization::PerBatch, Normalization::PerExample] {
        for k in 1..=2u32 {
            for n in 1..=2usize {
                let arch = CaeArch::new(k, n, 6, OutputActivation::Linear, normalization)?;
                let mut rng = substream(seed, "gradcheck", &[k as u64, n as u64]);
                let params = arch.init_params(&mut rng);
                let h = rayleigh_sample(&mut rng, n);
                let noise = NoiseModel::new(0.2)?;
                let samples: Vec<PilotSample> = (0..3 * arch.num_messages())
                    .map(|j| PilotSample {
                        message: Message::from_index(j % arch.num_messages()),
                        noise_draw: noise.sample(n, &mut rng),
                    })
                    .collect();
                let (_, g) = loss_and_grads(&arch, &params, &samples, &h)?;
                let fd = finite_diff_grad(|p| loss(&arch, p, &samples, &h).unwrap_or(f64::NAN), &params, eps);
                let mut max_rel: f64 = 0.0;
                let mut max_abs: f64 = 0.0;
                for (a, b) in g.iter().zip(fd.iter()) {
                    let diff = (a - b).abs();
                    max_abs = max_abs.max(diff);
                    if a.abs() > floor {
                        max_rel = max_rel.max(diff / a.abs().max(b.abs()));
                    }
                }
                out.push(GradCheckReport {
                    k,
                    n_ch: n,
                    normalization,
                    params: params.len(),
                    max_rel_error: max_rel,
                    max_abs_error: max_abs,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub rho: f64,
    pub steps: usize,
    pub mean_power: f64,
    /// Normalized lag-1 autocorrelation `Re E[h_i conj(h_{i-1})] / E|h|^2`.
    pub lag1_correlation: f64,
}

/// Empirical statistics of a single-use fading sequence.
pub fn channel_stats(rho: f64, steps: usize, seed: u64) -> Result<ChannelStats> {
    let mut fading = FadingProcess::new(rho, 1, substream(seed, label::CHANNEL, &[]))?;
    let hs: Vec<(f64, f64)> = (0..steps).map(|_| fading.ar_step().get(0)).collect();
    let power = hs.iter().map(|(r, i)| r * r + i * i).sum::<f64>() / steps as f64;
    let cross = hs.windows(2).map(|w| w[1].0 * w[0].0 + w[1].1 * w[0].1).sum::<f64>()
        / (steps.saturating_sub(1)).max(1) as f64;
    Ok(ChannelStats {
        rho,
        steps,
        mean_power: power,
        lag1_correlation: cross / power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradcheck_reports_small_errors() {
        for r in gradient_check(1e-6, 1e-6, 0).unwrap() {
            assert!(r.max_abs_error < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn channel_stats_near_stationary() {
        let s = channel_stats(0.9, 20_000, 1).unwrap();
        assert!((s.mean_power - 1.0).abs() < 0.1);
        assert!((s.lag1_correlation - 0.9).abs() < 0.02);
    }
}
