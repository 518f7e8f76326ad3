//! Distributed online dual averaging over networks.

// `!(a <= b)` is used deliberately so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circulation;
pub mod domain;
pub mod engine;
pub mod error;
pub mod graph;
pub mod objective;
pub mod presets;
pub mod prox;
pub mod pushsum;
pub mod regret;
pub mod sim;
pub mod step;

pub use circulation::OdaCEngine;
pub use domain::{ActionBox, AgentState, BlockMap, NetworkAction};
pub use engine::DualAveragingEngine;
pub use error::{Error, Result};
pub use objective::{Objective, QuadraticLoss};
pub use pushsum::OdaPsEngine;
pub use regret::RegretTrace;
pub use sim::{run, sweep, Experiment, RunConfig};
