//! Fixed-architecture dense networks with exact backpropagation.
//!
//! Parameters live in one flat vector so that optimizer and meta-learning
//! updates are plain vector arithmetic. Layout, per layer in order: the
//! weight matrix row-major with shape `(fan_out, fan_in)`, then the bias.
//!
//! Hidden layers always use a leaky rectifier with slope [`LEAKY_SLOPE`].
//! All passes are batched: rows of the input matrix are examples.

use std::ops::{Deref, DerefMut, Range};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Negative-side slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Activation applied after the last dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    LeakyRelu,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_dims: Vec<usize>,
    output: OutputActivation,
}

/// Location of one layer inside a [`ParamVector`].
#[derive(Debug, Clone)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, output: OutputActivation) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 layer dims, got {}",
                layer_dims.len()
            )));
        }
        if let Some(pos) = layer_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidSpec(format!("layer dim {pos} is zero")));
        }
        Ok(Self { layer_dims, output })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn layers(&self) -> Vec<LayerSlot> {
        let mut offset = 0;
        self.layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = offset..offset + fan_in * fan_out;
                let bias = weights.end..weights.end + fan_out;
                offset = bias.end;
                LayerSlot {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                }
            })
            .collect()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        Ok(())
    }
}

/// Flat network parameters in the canonical layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Concatenate two parameter blocks (e.g. encoder then decoder).
    pub fn concat(a: &[f64], b: &[f64]) -> Self {
        let mut values = Vec::with_capacity(a.len() + b.len());
        values.extend_from_slice(a);
        values.extend_from_slice(b);
        Self(values)
    }

    /// Little-endian byte image, used for hashing snapshots.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_params<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> ParamVector {
    let mut params = ParamVector::zeros(spec.param_count());
    for slot in spec.layers() {
        let bound = 1.0 / (slot.fan_in as f64).sqrt();
        for w in &mut params[slot.weights] {
            *w = rng.random_range(-bound..=bound);
        }
    }
    params
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`.
    activations: Vec<Array2<f64>>,
    /// Pre-activation of the last layer.
    logits: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().unwrap()
    }

    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }
}

#[inline]
fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

/// Row-wise numerically stable softmax, in place.
pub fn softmax_rows(mut logits: ArrayViewMut2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn weight_view<'a>(params: &'a [f64], slot: &LayerSlot) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((slot.fan_out, slot.fan_in), &params[slot.weights.clone()])
        .expect("slot shape matches layout")
}

/// Batched forward pass; `input` has one example per row.
pub fn forward_batch(spec: &MlpSpec, params: &[f64], input: ArrayView2<f64>) -> Result<ForwardCache> {
    spec.check_params(params)?;
    if input.ncols() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "network input",
            expected: spec.input_dim(),
            actual: input.ncols(),
        });
    }
    let batch = input.nrows();
    let layers = spec.layers();
    let last = layers.len() - 1;
    let mut activations = Vec::with_capacity(layers.len() + 1);
    activations.push(input.to_owned());
    let mut logits = Array2::zeros((0, 0));
    for (l, slot) in layers.iter().enumerate() {
        let w = weight_view(params, slot);
        let b = ArrayView1::from(&params[slot.bias.clone()]);
        let mut z = Array2::zeros((batch, slot.fan_out));
        general_mat_mul(1.0, &activations[l], &w.t(), 0.0, &mut z);
        z += &b;
        if l < last {
            z.mapv_inplace(leaky);
            activations.push(z);
        } else {
            logits = z.clone();
            match spec.output {
                OutputActivation::Linear => {}
                OutputActivation::LeakyRelu => z.mapv_inplace(leaky),
                OutputActivation::Softmax => softmax_rows(z.view_mut()),
            }
            activations.push(z);
        }
    }
    Ok(ForwardCache {
        activations,
        logits,
    })
}

fn check_grad_shape(cache: &ForwardCache, grad: &ArrayView2<f64>, dim: usize) -> Result<()> {
    if grad.nrows() != cache.batch_size() {
        return Err(Error::DimensionMismatch {
            context: "gradient batch",
            expected: cache.batch_size(),
            actual: grad.nrows(),
        });
    }
    if grad.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "output gradient",
            expected: dim,
            actual: grad.ncols(),
        });
    }
    Ok(())
}

/// Backward pass given the loss gradient with respect to the network output
/// (post-activation). Returns the parameter gradient summed over the batch and
/// the per-example input gradient.
pub fn backward_batch(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    output_grad: ArrayView2<f64>,
) -> Result<(ParamVector, Array2<f64>)> {
    spec.check_params(params)?;
    check_grad_shape(cache, &output_grad, spec.output_dim())?;
    let out = cache.output();
    let mut dz = output_grad.to_owned();
    match spec.output {
        OutputActivation::Linear => {}
        OutputActivation::LeakyRelu => {
            dz.zip_mut_with(out, |g, &a| {
                if a <= 0.0 {
                    *g *= LEAKY_SLOPE
                }
            });
        }
        OutputActivation::Softmax => {
            for (mut g, p) in dz.rows_mut().into_iter().zip(out.rows()) {
                let dot = g.dot(&p);
                g.zip_mut_with(&p, |gi, &pi| *gi = pi * (*gi - dot));
            }
        }
    }
    backward_from_logits(spec, params, cache, dz.view())
}

/// Backward pass given the loss gradient with respect to the last layer's
/// pre-activation (e.g. from a fused softmax cross-entropy).
pub fn backward_from_logits(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    logit_grad: ArrayView2<f64>,
) -> Result<(ParamVector, Array2<f64>)> {
    spec.check_params(params)?;
    check_grad_shape(cache, &logit_grad, spec.output_dim())?;
    let layers = spec.layers();
    let batch = cache.batch_size();
    let mut grad = ParamVector::zeros(spec.param_count());
    let mut dz = logit_grad.to_owned();
    for (l, slot) in layers.iter().enumerate().rev() {
        let a_prev = &cache.activations[l];
        {
            let mut dw = ArrayViewMut2::from_shape(
                (slot.fan_out, slot.fan_in),
                &mut grad[slot.weights.clone()],
            )
            .expect("slot shape matches layout");
            general_mat_mul(1.0, &dz.t(), a_prev, 0.0, &mut dw);
        }
        let db = dz.sum_axis(Axis(0));
        grad[slot.bias.clone()].copy_from_slice(db.as_slice().expect("contiguous"));

        let w = weight_view(params, slot);
        let mut da = Array2::zeros((batch, slot.fan_in));
        general_mat_mul(1.0, &dz, &w, 0.0, &mut da);
        if l > 0 {
            // a_prev is a hidden leaky output: positive iff its pre-activation was.
            da.zip_mut_with(a_prev, |g, &a| {
                if a <= 0.0 {
                    *g *= LEAKY_SLOPE
                }
            });
        }
        dz = da;
    }
    Ok((grad, dz))
}

/// Single-example forward pass.
pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    let view = ArrayView2::from_shape((1, input.len()), input).expect("row shape");
    let cache = forward_batch(spec, params, view)?;
    let output = cache.output().row(0).to_vec();
    Ok((output, cache))
}

/// Single-example backward pass.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    output_grad: &[f64],
) -> Result<(ParamVector, Vec<f64>)> {
    let view = ArrayView2::from_shape((1, output_grad.len()), output_grad).expect("row shape");
    let (grad, input_grad) = backward_batch(spec, params, cache, view)?;
    Ok((grad, input_grad.row(0).to_vec()))
}
