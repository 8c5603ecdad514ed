pub mod baselines;
pub mod cae;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metalearn;
pub mod numerics;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
