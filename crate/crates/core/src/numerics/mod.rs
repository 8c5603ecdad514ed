//! Dense-network engine: forward/backward passes, optimizers, and a
//! finite-difference oracle.

mod mlp;
mod optim;

pub use mlp::{
    backward_batch, backward_from_logits, forward_batch, init_params, mlp_backward, mlp_forward,
    softmax_rows, ForwardCache, LayerSlot, MlpSpec, OutputActivation, ParamVector, LEAKY_SLOPE,
};
pub(crate) use optim::{adam_update, sgd_step_in_place};
pub use optim::{adam_step, sgd_step, softmax_cross_entropy, step_lr, AdamState};

/// Central-difference gradient of `loss` at `params`.
pub fn finite_diff_grad<F>(loss: F, params: &[f64], eps: f64) -> ParamVector
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    let mut grad = ParamVector::zeros(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = loss(&probe);
        probe[i] = orig - eps;
        let down = loss(&probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * eps);
    }
    grad
}
