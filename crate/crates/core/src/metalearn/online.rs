use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{inner_adapt, meta_train, MetaConfig, TaskBuffer};
use crate::cae::evaluate_ser;
use crate::error::Result;
use crate::numerics::ParamVector;
use crate::scenario::Scenario;

/// Outcome of one deployment sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceResult {
    /// 1-based.
    pub sequence: usize,
    pub ser: f64,
    /// Hash of the deployed (fine-tuned) parameters.
    pub theta_hash: String,
    /// Hash of the pilot task, shared by every method on this sequence.
    pub task_hash: String,
}

pub fn params_hash(theta: &ParamVector) -> String {
    hex::encode(&Sha256::digest(theta.to_le_bytes())[..8])
}

/// Online loop: observe pilots, fine-tune from the meta initialization,
/// measure SER, store the task and meta-train the initialization for the
/// next sequence.
pub fn online_run(scenario: &Scenario, config: &MetaConfig) -> Result<Vec<SequenceResult>> {
    config.validate()?;
    let arch = scenario.arch();
    let mut theta = arch.init_params(&mut scenario.init_rng(1));
    let mut buffer = TaskBuffer::new(config.buffer_capacity);
    let mut results = Vec::with_capacity(scenario.n_sequences());
    for i in 1..=scenario.n_sequences() {
        let task = scenario.task(i)?;
        let deployed = inner_adapt(arch, &theta, &task, config.finetune_iters, config.inner_lr)?;
        let ser = evaluate_ser(
            arch,
            &deployed,
            &task.h,
            scenario.noise(),
            scenario.n_eval(),
            &mut scenario.eval_rng(i),
        )?;
        log::debug!("oml_cae seq {i}: ser {ser:.4}");
        results.push(SequenceResult {
            sequence: i,
            ser,
            theta_hash: params_hash(&deployed),
            task_hash: task.content_hash(),
        });
        buffer.push(task);
        let offset = if config.continue_schedule {
            ((i - 1) * config.outer_iters) as u64
        } else {
            0
        };
        theta = meta_train(arch, &theta, &buffer, config, offset, &mut scenario.sampling_rng(i))?;
    }
    Ok(results)
}
