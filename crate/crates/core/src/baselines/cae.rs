use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cae::{evaluate_ser, fit_sgd, loss_and_grads, CaeArch};
use crate::error::{Error, Result};
use crate::metalearn::{params_hash, MetaConfig, SequenceResult, Task, TaskBuffer};
use crate::numerics::{adam_update, step_lr, AdamState, ParamVector};
use crate::scenario::Scenario;

/// Options for the jointly trained baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointConfig {
    /// Store capacity; `None` keeps every observed task.
    pub store_capacity: Option<usize>,
    /// Carry parameters across sequences instead of re-initializing.
    pub warm_start: bool,
    /// Training iterations per sequence; `None` uses the meta outer count.
    pub joint_iters: Option<usize>,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            store_capacity: None,
            warm_start: true,
            joint_iters: None,
        }
    }
}

/// Parameters and pilot store carried between sequences.
#[derive(Debug, Clone)]
pub struct JointTrainState {
    pub theta: Option<ParamVector>,
    pub store: TaskBuffer<Task>,
}

impl JointTrainState {
    pub fn new(config: &JointConfig) -> Result<Self> {
        let store = match config.store_capacity {
            Some(0) => return Err(Error::config("store_capacity", "must be >= 1")),
            Some(c) => TaskBuffer::new(c),
            None => TaskBuffer::unbounded(),
        };
        Ok(Self { theta: None, store })
    }
}

/// Adam on mean pilot loss over sampled stored tasks, with the meta
/// scheduler. Each task's support and query pilots are used.
pub fn joint_train<R: Rng + ?Sized>(
    arch: &CaeArch,
    theta: &[f64],
    store: &TaskBuffer<Task>,
    meta: &MetaConfig,
    iters: usize,
    rng: &mut R,
) -> Result<ParamVector> {
    if store.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let pilots: Vec<_> = store.iter().map(|t| t.all_pilots()).collect();
    let mut theta = ParamVector::from_vec(theta.to_vec());
    let mut adam = AdamState::new(theta.len());
    let mut g = vec![0.0; theta.len()];
    for j in 0..iters {
        let picks = crate::metalearn::sample_task_indices(store.len(), meta.tasks_per_update, rng);
        g.iter_mut().for_each(|v| *v = 0.0);
        for &i in &picks {
            let task = store.get(i).expect("index in range");
            let (_, gi) = loss_and_grads(arch, &theta, &pilots[i], &task.h)?;
            for (a, b) in g.iter_mut().zip(gi.iter()) {
                *a += b;
            }
        }
        let count = picks.len() as f64;
        g.iter_mut().for_each(|v| *v /= count);
        let lr = step_lr(meta.outer_lr, j as u64, meta.lr_step_size, meta.lr_gamma);
        adam_update(&mut adam, &mut theta, &g, lr);
    }
    Ok(theta)
}

fn finish(
    scenario: &Scenario,
    i: usize,
    task: &Task,
    deployed: &ParamVector,
) -> Result<SequenceResult> {
    let ser = evaluate_ser(
        scenario.arch(),
        deployed,
        &task.h,
        scenario.noise(),
        scenario.n_eval(),
        &mut scenario.eval_rng(i),
    )?;
    Ok(SequenceResult {
        sequence: i,
        ser,
        theta_hash: params_hash(deployed),
        task_hash: task.content_hash(),
    })
}

/// Fresh initialization fine-tuned on the support set of sequence `i`.
pub fn scratch_cae_sequence(
    scenario: &Scenario,
    i: usize,
    task: &Task,
    train_iters: usize,
    lr: f64,
) -> Result<SequenceResult> {
    let arch = scenario.arch();
    let init = arch.init_params(&mut scenario.init_rng(i));
    let deployed = fit_sgd(arch, &init, &task.support, &task.h, train_iters, lr)?;
    finish(scenario, i, task, &deployed)
}

/// Store the task, train on the store, then fine-tune a copy on the support.
pub fn joint_cae_sequence(
    scenario: &Scenario,
    i: usize,
    task: &Task,
    state: &mut JointTrainState,
    meta: &MetaConfig,
    joint: &JointConfig,
) -> Result<SequenceResult> {
    let arch = scenario.arch();
    state.store.push(task.clone());
    let start = match (&state.theta, joint.warm_start) {
        (Some(theta), true) => theta.clone(),
        _ => arch.init_params(&mut scenario.init_rng(i)),
    };
    let iters = joint.joint_iters.unwrap_or(meta.outer_iters);
    let trained = joint_train(arch, &start, &state.store, meta, iters, &mut scenario.sampling_rng(i))?;
    let deployed = fit_sgd(arch, &trained, &task.support, &task.h, meta.finetune_iters, meta.inner_lr)?;
    state.theta = Some(trained);
    finish(scenario, i, task, &deployed)
}

/// Scratch CAE over every sequence of the scenario.
pub fn scratch_run(scenario: &Scenario, meta: &MetaConfig) -> Result<Vec<SequenceResult>> {
    (1..=scenario.n_sequences())
        .map(|i| {
            let task = scenario.task(i)?;
            scratch_cae_sequence(scenario, i, &task, meta.finetune_iters, meta.inner_lr)
        })
        .collect()
}

/// Jointly trained CAE over every sequence of the scenario.
pub fn joint_run(scenario: &Scenario, meta: &MetaConfig, joint: &JointConfig) -> Result<Vec<SequenceResult>> {
    let mut state = JointTrainState::new(joint)?;
    (1..=scenario.n_sequences())
        .map(|i| {
            let task = scenario.task(i)?;
            joint_cae_sequence(scenario, i, &task, &mut state, meta, joint)
        })
        .collect()
}

/// QPSK with pilot-based channel estimation over every sequence.
pub fn qpsk_run(scenario: &Scenario) -> Result<Vec<SequenceResult>> {
    let arch = scenario.arch();
    (1..=scenario.n_sequences())
        .map(|i| {
            let task = scenario.task(i)?;
            let mut rng = scenario.qpsk_pilot_rng(i);
            let h_hat = super::estimate_from_pilots(&task.h, scenario.noise(), scenario.shots(), &mut rng)?;
            let config = super::QpskConfig::new(arch.k(), arch.n_ch())?;
            let counts = super::qpsk_transmit(
                config,
                &task.h,
                &h_hat,
                scenario.noise(),
                scenario.n_eval(),
                &mut scenario.eval_rng(i),
            )?;
            Ok(SequenceResult {
                sequence: i,
                ser: counts.ser(),
                theta_hash: params_hash(&ParamVector::from_vec(h_hat.into_reals())),
                task_hash: task.content_hash(),
            })
        })
        .collect()
}
