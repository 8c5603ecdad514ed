use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cae::{codebook, transmit, CaeArch};
use crate::channel::{ComplexBlock, NoiseModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationPoint {
    /// 1-based.
    pub message: usize,
    /// `[re, im]` per channel use, concatenated.
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedPoint {
    pub message: usize,
    pub predicted: usize,
    pub correct: bool,
    pub point: Vec<f64>,
}

/// Codewords and a sample of received signals, ready for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationDoc {
    pub k: u32,
    pub n_ch: usize,
    pub snr_db: f64,
    /// `[re, im]` per channel use.
    pub h: Vec<[f64; 2]>,
    pub sigma2: f64,
    pub constellation: Vec<ConstellationPoint>,
    pub received: Vec<ReceivedPoint>,
}

impl ConstellationDoc {
    /// Mean power per channel use of the exported codewords.
    pub fn mean_power(&self) -> f64 {
        let total: f64 = self
            .constellation
            .iter()
            .map(|c| c.point.iter().map(|v| v * v).sum::<f64>())
            .sum();
        total / (self.constellation.len() * self.n_ch) as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Build the constellation document for a trained model.
pub fn export_constellation<R: Rng + ?Sized>(
    arch: &CaeArch,
    params: &[f64],
    h: &ComplexBlock,
    noise: &NoiseModel,
    snr_db: f64,
    n_show: usize,
    rng: &mut R,
) -> Result<ConstellationDoc> {
    let book = codebook(arch, params)?;
    let constellation = book
        .iter()
        .enumerate()
        .map(|(i, x)| ConstellationPoint {
            message: i + 1,
            point: x.as_reals().to_vec(),
        })
        .collect();
    let sent = transmit(arch, params, h, noise, n_show, rng)?;
    let received = (0..n_show)
        .map(|j| ReceivedPoint {
            message: sent.messages[j] + 1,
            predicted: sent.predicted[j] + 1,
            correct: sent.messages[j] == sent.predicted[j],
            point: sent.received.row(j).to_vec(),
        })
        .collect();
    Ok(ConstellationDoc {
        k: arch.k(),
        n_ch: arch.n_ch(),
        snr_db,
        h: h.pairs().map(|(r, i)| [r, i]).collect(),
        sigma2: noise.sigma2(),
        constellation,
        received,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cae::{fit_sgd, Message, Normalization, PilotSample};
    use crate::channel::cmul;
    use crate::numerics::OutputActivation;
    use crate::rng::substream;

    fn arch() -> CaeArch {
        CaeArch::new(2, 1, 16, OutputActivation::Linear, Normalization::PerBatch).unwrap()
    }

    #[test]
    fn four_points_with_unit_power() {
        let a = arch();
        let p = a.init_params(&mut substream(1, "init", &[]));
        let h = ComplexBlock::from_pairs(&[(0.6, -0.8)]);
        let doc = export_constellation(&a, &p, &h, &NoiseModel::from_snr_db(10.0), 10.0, 25, &mut substream(1, "e", &[]))
            .unwrap();
        assert_eq!(doc.constellation.len(), 4);
        assert_eq!(doc.received.len(), 25);
        assert!((doc.mean_power() - 1.0).abs() < 1e-6);
        let json: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        for key in ["k", "n_ch", "snr_db", "h", "sigma2", "constellation", "received"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json["received"][0].get("correct").is_some());
    }

    #[test]
    fn noiseless_export_matches_codewords() {
        let a = arch();
        let h = ComplexBlock::from_pairs(&[(0.3, 0.9)]);
        let pilots: Vec<PilotSample> = (0..4)
            .map(|m| PilotSample {
                message: Message::from_index(m),
                noise_draw: ComplexBlock::zeros(1),
            })
            .collect();
        let init = a.init_params(&mut substream(2, "init", &[]));
        let p = fit_sgd(&a, &init, &pilots, &h, 400, 0.05).unwrap();
        let doc = export_constellation(&a, &p, &h, &NoiseModel::noiseless(), f64::INFINITY, 40, &mut substream(2, "e", &[]))
            .unwrap();
        for r in &doc.received {
            let c = &doc.constellation[r.message - 1].point;
            let (yr, yi) = cmul((0.3, 0.9), (c[0], c[1]));
            assert!((r.point[0] - yr).abs() < 1e-12 && (r.point[1] - yi).abs() < 1e-12);
            assert!(r.correct);
        }
    }
}
