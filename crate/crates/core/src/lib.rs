#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod datasets;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod partition;
pub mod repulsion;
pub mod sampler;
pub mod trace;

pub use config::ModelConfig;
pub use datasets::{Dataset, Scenario};
pub use error::{Error, Result};
pub use sampler::{run_chain, MixtureState, Model, RunSpec};
pub use trace::{Snapshot, Trace};
