//! The channel autoencoder.
//!
//! An encoder network maps a one-hot message to `2 * n_ch` reals, which are
//! power-normalized and sent through `y = h x + n`; a decoder network maps the
//! received `y` to message probabilities. [`loss_and_grads`] differentiates the
//! whole chain, including the normalization scalar and the complex channel
//! product, with respect to encoder and decoder parameters jointly.
//!
//! Parameters are one flat vector: encoder block first, decoder block second.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{cmul, ComplexBlock, NoiseModel};
use crate::error::{Error, Result};
use crate::numerics::{
    backward_batch, backward_from_logits, forward_batch, init_params, sgd_step_in_place, softmax_rows,
    MlpSpec, OutputActivation, ParamVector,
};

/// Floor on the summed power inside the normalization square root.
pub const NORM_EPSILON: f64 = 1e-12;

/// Hidden width of every dense layer in the reference architecture.
pub const DEFAULT_HIDDEN: usize = 256;

/// Evaluation chunk size; bounds decoder activation memory.
const EVAL_CHUNK: usize = 2048;

/// How the transmit power constraint is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// One scalar per batch so that mean power per complex use is 1.
    #[default]
    PerBatch,
    /// Every codeword individually scaled to power 1 per complex use.
    PerExample,
}

/// A message index in `1..=2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message(usize);

impl Message {
    pub fn new(m: usize, k: u32) -> Result<Self> {
        let max = 1usize << k;
        if m == 0 || m > max {
            return Err(Error::MessageOutOfRange { message: m, max });
        }
        Ok(Self(m))
    }

    /// From a zero-based index (`0..2^k`).
    pub fn from_index(index: usize) -> Self {
        Self(index + 1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 - 1
    }
}

pub fn one_hot(m: Message, k: u32) -> Result<Vec<f64>> {
    let m = Message::new(m.get(), k)?;
    let mut v = vec![0.0; 1 << k];
    v[m.index()] = 1.0;
    Ok(v)
}

/// A labeled pilot: the message sent plus the noise realization it met.
///
/// Storing noise rather than the received signal lets the pilot be re-sent
/// through an updated encoder during adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSample {
    pub message: Message,
    pub noise_draw: ComplexBlock,
}

/// Encoder/decoder architecture; parameters are kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct CaeArch {
    k: u32,
    n_ch: usize,
    encoder: MlpSpec,
    decoder: MlpSpec,
    normalization: Normalization,
}

impl CaeArch {
    /// Encoder `2^k -> hidden -> hidden -> 2 n_ch`, decoder
    /// `2 n_ch -> hidden -> hidden -> hidden -> 2^k` with a softmax head.
    pub fn new(
        k: u32,
        n_ch: usize,
        hidden: usize,
        encoder_output: OutputActivation,
        normalization: Normalization,
    ) -> Result<Self> {
        if k == 0 || k > 16 {
            return Err(Error::config("bits", format!("must be in 1..=16, got {k}")));
        }
        if n_ch == 0 {
            return Err(Error::config("channel_uses", "must be >= 1"));
        }
        if encoder_output == OutputActivation::Softmax {
            return Err(Error::config("encoder_output", "softmax is not a valid encoder head"));
        }
        let m = 1usize << k;
        let encoder = MlpSpec::new(vec![m, hidden, hidden, 2 * n_ch], encoder_output)?;
        let decoder = MlpSpec::new(
            vec![2 * n_ch, hidden, hidden, hidden, m],
            OutputActivation::Softmax,
        )?;
        Ok(Self {
            k,
            n_ch,
            encoder,
            decoder,
            normalization,
        })
    }

    /// Reference layout: 256-wide layers, linear encoder head, per-batch power.
    pub fn reference(k: u32, n_ch: usize) -> Result<Self> {
        Self::new(
            k,
            n_ch,
            DEFAULT_HIDDEN,
            OutputActivation::Linear,
            Normalization::PerBatch,
        )
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n_ch(&self) -> usize {
        self.n_ch
    }

    pub fn num_messages(&self) -> usize {
        1 << self.k
    }

    pub fn encoder(&self) -> &MlpSpec {
        &self.encoder
    }

    pub fn decoder(&self) -> &MlpSpec {
        &self.decoder
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Index where decoder parameters start.
    pub fn split(&self) -> usize {
        self.encoder.param_count()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let enc = init_params(&self.encoder, rng);
        let dec = init_params(&self.decoder, rng);
        ParamVector::concat(&enc, &dec)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "autoencoder parameters",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        Ok(())
    }

    fn check_block(&self, context: &'static str, b: &ComplexBlock) -> Result<()> {
        if b.n() != self.n_ch {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n_ch,
                actual: b.n(),
            });
        }
        Ok(())
    }
}

/// Architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CaeModel {
    pub arch: CaeArch,
    pub params: ParamVector,
}

impl CaeModel {
    pub fn new(arch: CaeArch, params: ParamVector) -> Result<Self> {
        arch.check_params(&params)?;
        Ok(Self { arch, params })
    }

    pub fn encode(&self, messages: &[Message]) -> Result<Vec<ComplexBlock>> {
        encode(&self.arch, &self.params, messages)
    }

    pub fn decode(&self, y: &ComplexBlock) -> Result<Vec<f64>> {
        decode(&self.arch, &self.params, y)
    }
}

fn one_hot_rows(arch: &CaeArch, indices: &[usize]) -> Array2<f64> {
    let mut rows = Array2::zeros((indices.len(), arch.num_messages()));
    for (r, &i) in indices.iter().enumerate() {
        rows[[r, i]] = 1.0;
    }
    rows
}

/// Raw encoder outputs for the given zero-based message indices.
fn raw_encode(arch: &CaeArch, params: &[f64], indices: &[usize]) -> Result<crate::numerics::ForwardCache> {
    let rows = one_hot_rows(arch, indices);
    forward_batch(&arch.encoder, &params[..arch.split()], rows.view())
}

/// Power-normalization scale factors, one per row of `raw`, given how many
/// times each row occurs in the batch.
fn norm_scales(arch: &CaeArch, raw: ArrayView2<f64>, counts: &[usize]) -> (Vec<f64>, f64) {
    let n = arch.n_ch as f64;
    match arch.normalization {
        Normalization::PerBatch => {
            let batch: usize = counts.iter().sum();
            let power: f64 = raw
                .rows()
                .into_iter()
                .zip(counts)
                .map(|(r, &c)| c as f64 * r.dot(&r))
                .sum();
            let scale = (batch as f64 * n / power.max(NORM_EPSILON)).sqrt();
            (vec![scale; raw.nrows()], power)
        }
        Normalization::PerExample => {
            let scales = raw
                .rows()
                .into_iter()
                .map(|r| (n / r.dot(&r).max(NORM_EPSILON)).sqrt())
                .collect();
            (scales, f64::NAN)
        }
    }
}

/// Encode a batch of messages into normalized codewords.
///
/// Under per-batch normalization the scale depends on the whole batch, so the
/// same message may map to different points in different batches.
pub fn encode(arch: &CaeArch, params: &[f64], messages: &[Message]) -> Result<Vec<ComplexBlock>> {
    arch.check_params(params)?;
    if messages.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let indices = messages
        .iter()
        .map(|&m| Message::new(m.get(), arch.k).map(Message::index))
        .collect::<Result<Vec<_>>>()?;
    let cache = raw_encode(arch, params, &indices)?;
    let raw = cache.output();
    if raw.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateEncoding);
    }
    let counts = vec![1; indices.len()];
    let (scales, _) = norm_scales(arch, raw.view(), &counts);
    Ok(raw
        .rows()
        .into_iter()
        .zip(scales)
        .map(|(r, s)| ComplexBlock::from_reals(r.iter().map(|v| v * s).collect()).expect("even width"))
        .collect())
}

/// Fixed codeword per message, normalized over the full message set.
pub fn codebook(arch: &CaeArch, params: &[f64]) -> Result<Vec<ComplexBlock>> {
    let all: Vec<Message> = (0..arch.num_messages()).map(Message::from_index).collect();
    encode(arch, params, &all)
}

/// Message probabilities for one received block.
pub fn decode(arch: &CaeArch, params: &[f64], y: &ComplexBlock) -> Result<Vec<f64>> {
    arch.check_params(params)?;
    arch.check_block("received block", y)?;
    let view = ArrayView2::from_shape((1, y.as_reals().len()), y.as_reals()).expect("row");
    let cache = forward_batch(&arch.decoder, &params[arch.split()..], view)?;
    Ok(cache.output().row(0).to_vec())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Hard decisions (zero-based) for a batch of received rows.
pub fn detect_batch(arch: &CaeArch, params: &[f64], received: ArrayView2<f64>) -> Result<Vec<usize>> {
    arch.check_params(params)?;
    let mut out = Vec::with_capacity(received.nrows());
    let dec = &params[arch.split()..];
    for start in (0..received.nrows()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(received.nrows());
        let chunk = received.slice(ndarray::s![start..end, ..]);
        // Argmax over logits equals argmax over probabilities except in exact
        // probability ties; decode through the softmax so ties match `decode`.
        let cache = forward_batch(&arch.decoder, dec, chunk)?;
        out.extend(cache.output().rows().into_iter().map(|r| argmax(r.iter().copied())));
    }
    Ok(out)
}

/// Mean cross-entropy over pilots sent through channel `h`, with its exact
/// gradient with respect to all autoencoder parameters.
pub fn loss_and_grads(
    arch: &CaeArch,
    params: &[f64],
    samples: &[PilotSample],
    h: &ComplexBlock,
) -> Result<(f64, ParamVector)> {
    arch.check_params(params)?;
    arch.check_block("channel", h)?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m_count = arch.num_messages();
    let width = 2 * arch.n_ch;

    // Encode each distinct message once; duplicates share the codeword.
    let mut counts = vec![0usize; m_count];
    for s in samples {
        let m = Message::new(s.message.get(), arch.k)?;
        arch.check_block("pilot noise", &s.noise_draw)?;
        counts[m.index()] += 1;
    }
    let unique: Vec<usize> = (0..m_count).filter(|&i| counts[i] > 0).collect();
    let mut row_of = vec![usize::MAX; m_count];
    for (r, &i) in unique.iter().enumerate() {
        row_of[i] = r;
    }
    let unique_counts: Vec<usize> = unique.iter().map(|&i| counts[i]).collect();
    let enc_params = &params[..arch.split()];
    let dec_params = &params[arch.split()..];
    let enc_cache = raw_encode(arch, params, &unique)?;
    let raw = enc_cache.output();
    let (scales, power) = norm_scales(arch, raw.view(), &unique_counts);

    let batch = samples.len();
    let mut received = Array2::zeros((batch, width));
    for (j, s) in samples.iter().enumerate() {
        let r = row_of[s.message.index()];
        for u in 0..arch.n_ch {
            let x = (raw[[r, 2 * u]] * scales[r], raw[[r, 2 * u + 1]] * scales[r]);
            let (yr, yi) = cmul(h.get(u), x);
            let (nr, ni) = s.noise_draw.get(u);
            received[[j, 2 * u]] = yr + nr;
            received[[j, 2 * u + 1]] = yi + ni;
        }
    }

    let dec_cache = forward_batch(&arch.decoder, dec_params, received.view())?;
    let mut logit_grad = dec_cache.logits().clone();
    softmax_rows(logit_grad.view_mut());
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    for (j, s) in samples.iter().enumerate() {
        let label = s.message.index();
        let p = logit_grad[[j, label]];
        // -log softmax via the log-sum-exp of the logits for accuracy at saturation
        let logits = dec_cache.logits().row(j);
        let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += lse - logits[label];
        logit_grad[[j, label]] = p - 1.0;
    }
    loss *= inv_b;
    logit_grad *= inv_b;

    let (dec_grad, dy) = backward_from_logits(&arch.decoder, dec_params, &dec_cache, logit_grad.view())?;

    // Back through y = h * (scale * raw): accumulate dL/dx_tilde per distinct message.
    let rows = unique.len();
    let mut g_tilde = Array2::<f64>::zeros((rows, width));
    for (j, s) in samples.iter().enumerate() {
        let r = row_of[s.message.index()];
        for u in 0..arch.n_ch {
            let (hr, hi) = h.get(u);
            let (gr, gi) = (dy[[j, 2 * u]], dy[[j, 2 * u + 1]]);
            g_tilde[[r, 2 * u]] += hr * gr + hi * gi;
            g_tilde[[r, 2 * u + 1]] += -hi * gr + hr * gi;
        }
    }

    let mut g_raw = Array2::<f64>::zeros((rows, width));
    match arch.normalization {
        Normalization::PerBatch => {
            let scale = scales.first().copied().unwrap_or(0.0);
            let coupling: f64 = g_tilde
                .rows()
                .into_iter()
                .zip(raw.rows())
                .map(|(g, x)| g.dot(&x))
                .sum();
            // d(scale)/d(power) vanishes on the floored branch
            let k = if power > NORM_EPSILON {
                scale * coupling / power
            } else {
                0.0
            };
            for r in 0..rows {
                let c = unique_counts[r] as f64;
                for d in 0..width {
                    g_raw[[r, d]] = scale * g_tilde[[r, d]] - k * c * raw[[r, d]];
                }
            }
        }
        Normalization::PerExample => {
            for r in 0..rows {
                let x = raw.row(r);
                let g = g_tilde.row(r);
                let e = x.dot(&x);
                let k = if e > NORM_EPSILON { scales[r] * g.dot(&x) / e } else { 0.0 };
                for d in 0..width {
                    g_raw[[r, d]] = scales[r] * g[d] - k * x[d];
                }
            }
        }
    }

    let (enc_grad, _) = backward_batch(&arch.encoder, enc_params, &enc_cache, g_raw.view())?;
    Ok((loss, ParamVector::concat(&enc_grad, &dec_grad)))
}

/// Mean cross-entropy only.
pub fn loss(arch: &CaeArch, params: &[f64], samples: &[PilotSample], h: &ComplexBlock) -> Result<f64> {
    loss_and_grads(arch, params, samples, h).map(|(l, _)| l)
}

/// `iters` full-batch SGD steps on the pilots; returns the fitted copy.
pub fn fit_sgd(
    arch: &CaeArch,
    params: &[f64],
    samples: &[PilotSample],
    h: &ComplexBlock,
    iters: usize,
    lr: f64,
) -> Result<ParamVector> {
    let mut theta = ParamVector::from_vec(params.to_vec());
    for _ in 0..iters {
        let (_, g) = loss_and_grads(arch, &theta, samples, h)?;
        sgd_step_in_place(&mut theta, &g, lr);
    }
    Ok(theta)
}

/// Outcome of pushing random messages through the channel and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub messages: Vec<usize>,
    pub received: Array2<f64>,
    pub predicted: Vec<usize>,
}

/// Send `count` uniform messages (zero-based) through `h` with fresh noise.
/// The codebook is frozen from the full message set.
pub fn transmit<R: Rng + ?Sized>(
    arch: &CaeArch,
    params: &[f64],
    h: &ComplexBlock,
    noise: &NoiseModel,
    count: usize,
    rng: &mut R,
) -> Result<Transmission> {
    arch.check_block("channel", h)?;
    let book = codebook(arch, params)?;
    let width = 2 * arch.n_ch;
    let mut messages = Vec::with_capacity(count);
    let mut received = Array2::zeros((count, width));
    for j in 0..count {
        let m = rng.random_range(0..arch.num_messages());
        let draw = noise.sample(arch.n_ch, rng);
        let x = &book[m];
        for u in 0..arch.n_ch {
            let (yr, yi) = cmul(h.get(u), x.get(u));
            let (nr, ni) = draw.get(u);
            received[[j, 2 * u]] = yr + nr;
            received[[j, 2 * u + 1]] = yi + ni;
        }
        messages.push(m);
    }
    let predicted = detect_batch(arch, params, received.view())?;
    Ok(Transmission {
        messages,
        received,
        predicted,
    })
}

/// Fraction of `n_eval` uniform messages decoded incorrectly.
///
/// With all-zero parameters the encoder output is degenerate; every message
/// then decodes to message 1 (uniform probabilities, lowest-index tie break).
pub fn evaluate_ser<R: Rng + ?Sized>(
    arch: &CaeArch,
    params: &[f64],
    h: &ComplexBlock,
    noise: &NoiseModel,
    n_eval: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_eval == 0 {
        return Err(Error::config("n_eval", "must be >= 1"));
    }
    let errors = match transmit(arch, params, h, noise, n_eval, rng) {
        Ok(t) => t
            .messages
            .iter()
            .zip(&t.predicted)
            .filter(|(m, p)| m != p)
            .count(),
        Err(Error::DegenerateEncoding) => {
            // Nothing is transmitted; the decoder sees noise only.
            let mut errors = 0;
            let mut received = Array2::zeros((n_eval, 2 * arch.n_ch));
            let mut messages = Vec::with_capacity(n_eval);
            for j in 0..n_eval {
                messages.push(rng.random_range(0..arch.num_messages()));
                let draw = noise.sample(arch.n_ch, rng);
                for (d, v) in draw.as_reals().iter().enumerate() {
                    received[[j, d]] = *v;
                }
            }
            let predicted = detect_batch(arch, params, received.view())?;
            for (m, p) in messages.iter().zip(&predicted) {
                if m != p {
                    errors += 1;
                }
            }
            errors
        }
        Err(e) => return Err(e),
    };
    Ok(errors as f64 / n_eval as f64)
}
