use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Task, TaskBuffer};
use crate::cae::{fit_sgd, loss_and_grads, CaeArch};
use crate::error::{Error, Result};
use crate::numerics::{adam_update, step_lr, AdamState, ParamVector};

/// Hyperparameters of the inner/outer loops and the deployment fine-tune.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub adapt_steps: usize,
    pub outer_iters: usize,
    pub tasks_per_update: usize,
    pub lr_step_size: u64,
    pub lr_gamma: f64,
    pub finetune_iters: usize,
    pub buffer_capacity: usize,
    /// Query pilots per message; `None` uses the support shot count.
    pub query_shots: Option<usize>,
    /// Keep counting scheduler steps across online sequences instead of
    /// restarting the schedule for every sequence.
    pub continue_schedule: bool,
    /// Differentiate through the inner SGD steps (Hessian-vector products by
    /// central differences of gradients) instead of the first-order shortcut.
    pub second_order: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl MetaConfig {
    pub fn paper() -> Self {
        Self {
            inner_lr: 0.05,
            outer_lr: 1e-4,
            adapt_steps: 1,
            outer_iters: 6000,
            tasks_per_update: 5,
            lr_step_size: 300,
            lr_gamma: 0.9,
            finetune_iters: 1000,
            buffer_capacity: 15,
            query_shots: None,
            continue_schedule: false,
            second_order: true,
        }
    }

    /// Shortened schedule for quick runs.
    pub fn desk() -> Self {
        Self {
            outer_iters: 1500,
            finetune_iters: 300,
            ..Self::paper()
        }
    }

    pub fn query_shots_for(&self, shots: usize) -> usize {
        self.query_shots.unwrap_or(shots)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite and >= 0, got {v}")))
            }
        };
        nonneg("inner_lr", self.inner_lr)?;
        nonneg("outer_lr", self.outer_lr)?;
        if !(self.lr_gamma.is_finite() && self.lr_gamma > 0.0) {
            return Err(Error::config("lr_gamma", "must be > 0"));
        }
        if self.lr_step_size == 0 {
            return Err(Error::config("lr_step_size", "must be >= 1"));
        }
        if self.tasks_per_update == 0 {
            return Err(Error::config("tasks_per_update", "must be >= 1"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("buffer_capacity", "must be >= 1"));
        }
        if self.query_shots == Some(0) {
            return Err(Error::config("query_shots", "must be >= 1"));
        }
        Ok(())
    }
}

/// `steps` full-batch SGD steps on the support set; `theta` is untouched.
pub fn inner_adapt(
    arch: &CaeArch,
    theta: &[f64],
    task: &Task,
    steps: usize,
    alpha: f64,
) -> Result<ParamVector> {
    fit_sgd(arch, theta, &task.support, &task.h, steps, alpha)
}

/// Relative displacement for the finite-difference Hessian-vector product.
const HVP_STEP: f64 = 6e-6;

/// `H v` of the support loss at `point`, by central differences of the
/// analytic gradient along `v`.
fn support_hvp(arch: &CaeArch, point: &[f64], task: &Task, v: &[f64]) -> Result<Vec<f64>> {
    let v_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v_norm == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let p_norm = point.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = HVP_STEP * (1.0 + p_norm) / v_norm;
    let shifted = |sign: f64| -> Vec<f64> { point.iter().zip(v).map(|(p, d)| p + sign * r * d).collect() };
    let (_, plus) = loss_and_grads(arch, &shifted(1.0), &task.support, &task.h)?;
    let (_, minus) = loss_and_grads(arch, &shifted(-1.0), &task.support, &task.h)?;
    Ok(plus.iter().zip(minus.iter()).map(|(a, b)| (a - b) / (2.0 * r)).collect())
}

/// Query gradient of one task with respect to the initialization, pulled
/// back through the inner SGD steps: `v <- (I - alpha H_j) v`.
fn second_order_task_gradient(arch: &CaeArch, theta: &[f64], task: &Task, config: &MetaConfig) -> Result<ParamVector> {
    let mut path = Vec::with_capacity(config.adapt_steps);
    let mut current = theta.to_vec();
    for _ in 0..config.adapt_steps {
        let (_, g) = loss_and_grads(arch, &current, &task.support, &task.h)?;
        let next: Vec<f64> = current.iter().zip(g.iter()).map(|(p, gi)| p - config.inner_lr * gi).collect();
        path.push(std::mem::replace(&mut current, next));
    }
    let (_, query_grad) = loss_and_grads(arch, &current, &task.query, &task.h)?;
    let mut v = query_grad.into_vec();
    if config.inner_lr != 0.0 {
        for point in path.iter().rev() {
            let hv = support_hvp(arch, point, task, &v)?;
            for (vi, h) in v.iter_mut().zip(hv) {
                *vi -= config.inner_lr * h;
            }
        }
    }
    Ok(ParamVector::from_vec(v))
}

/// Meta-gradient: mean over tasks of the query loss gradient after
/// adaptation. First-order by default, which takes the query gradient at the
/// adapted parameters as is.
pub fn meta_gradient(
    arch: &CaeArch,
    theta: &[f64],
    tasks: &[&Task],
    config: &MetaConfig,
) -> Result<ParamVector> {
    if tasks.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut sum = ParamVector::zeros(theta.len());
    for task in tasks {
        let g = if config.second_order {
            second_order_task_gradient(arch, theta, task, config)?
        } else {
            let adapted = inner_adapt(arch, theta, task, config.adapt_steps, config.inner_lr)?;
            loss_and_grads(arch, &adapted, &task.query, &task.h)?.1
        };
        for (s, gi) in sum.iter_mut().zip(g.iter()) {
            *s += gi;
        }
    }
    let count = tasks.len() as f64;
    for s in sum.iter_mut() {
        *s /= count;
    }
    Ok(sum)
}

/// One Adam update of the shared initialization at outer iteration `iter`.
pub fn outer_meta_step(
    arch: &CaeArch,
    theta: &[f64],
    tasks: &[&Task],
    config: &MetaConfig,
    adam: &AdamState,
    iter: u64,
) -> Result<(ParamVector, AdamState)> {
    let g = meta_gradient(arch, theta, tasks, config)?;
    let lr = step_lr(config.outer_lr, iter, config.lr_step_size, config.lr_gamma);
    let mut state = adam.clone();
    let mut next = ParamVector::from_vec(theta.to_vec());
    adam_update(&mut state, &mut next, &g, lr);
    Ok((next, state))
}

/// Indices of the tasks used by one outer update.
pub(crate) fn sample_task_indices<R: Rng + ?Sized>(available: usize, wanted: usize, rng: &mut R) -> Vec<usize> {
    if available >= wanted {
        index::sample(rng, available, wanted).into_vec()
    } else {
        (0..wanted).map(|_| rng.random_range(0..available)).collect()
    }
}

/// Run `config.outer_iters` outer updates on tasks drawn from `buffer`.
///
/// A fresh Adam state is used for every call; the learning-rate schedule is
/// indexed from `iter_offset`.
pub fn meta_train<R: Rng + ?Sized>(
    arch: &CaeArch,
    theta: &[f64],
    buffer: &TaskBuffer<Task>,
    config: &MetaConfig,
    iter_offset: u64,
    rng: &mut R,
) -> Result<ParamVector> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut theta = ParamVector::from_vec(theta.to_vec());
    let mut adam = AdamState::new(theta.len());
    for j in 0..config.outer_iters {
        let picks = sample_task_indices(buffer.len(), config.tasks_per_update, rng);
        let tasks: Vec<&Task> = picks.iter().map(|&i| buffer.get(i).expect("index in range")).collect();
        let g = meta_gradient(arch, &theta, &tasks, config)?;
        let lr = step_lr(
            config.outer_lr,
            iter_offset + j as u64,
            config.lr_step_size,
            config.lr_gamma,
        );
        adam_update(&mut adam, &mut theta, &g, lr);
    }
    Ok(theta)
}
