//! First-order MAML over pilot tasks and the online deployment loop.

mod buffer;
mod maml;
mod online;
mod task;

pub use buffer::TaskBuffer;
pub(crate) use maml::sample_task_indices;
pub use maml::{inner_adapt, meta_gradient, meta_train, outer_meta_step, MetaConfig};
pub use online::{online_run, params_hash, SequenceResult};
pub use task::{make_pilot_task, Task};
