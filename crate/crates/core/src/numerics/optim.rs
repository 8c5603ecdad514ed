//! Loss, optimizers and learning-rate schedule.

use crate::error::{Error, Result};
use crate::numerics::ParamVector;

/// Cross-entropy of `softmax(logits)` against `label`, with its logit gradient.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

pub fn sgd_step(params: &[f64], grad: &[f64], lr: f64) -> Result<ParamVector> {
    check_len("sgd gradient", params.len(), grad.len())?;
    Ok(ParamVector::from_vec(
        params.iter().zip(grad).map(|(p, g)| p - lr * g).collect(),
    ))
}

/// In-place variant of [`sgd_step`] for hot loops.
pub(crate) fn sgd_step_in_place(params: &mut [f64], grad: &[f64], lr: f64) {
    debug_assert_eq!(params.len(), grad.len());
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    state: &AdamState,
    params: &[f64],
    grad: &[f64],
    lr: f64,
) -> Result<(AdamState, ParamVector)> {
    check_len("adam gradient", params.len(), grad.len())?;
    check_len("adam state", params.len(), state.m.len())?;
    check_len("adam state", params.len(), state.v.len())?;
    let mut next = state.clone();
    let mut out = ParamVector::from_vec(params.to_vec());
    adam_update(&mut next, &mut out, grad, lr);
    Ok((next, out))
}

pub(crate) fn adam_update(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Step decay: `base_lr * gamma^floor(iter / step_size)`.
pub fn step_lr(base_lr: f64, iter: u64, step_size: u64, gamma: f64) -> f64 {
    let step_size = step_size.max(1);
    base_lr * gamma.powi((iter / step_size) as i32)
}
