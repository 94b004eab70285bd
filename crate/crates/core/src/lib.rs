//! Swarm-based inertial optimizers with mass transfer.
//!
//! Agents carry a position, velocity and mass. Mass drains from poorly ranked
//! agents to the best one; the dynamics are integrated with energy-dissipative
//! IMEX/SIMEX schemes, a stochastic-acceptance variant, and a swarm gradient
//! descent baseline. [`harness`] runs Monte-Carlo batches over benchmarks.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod lifecycle;
pub mod lipschitz;
pub mod objectives;
pub mod schemes;
pub mod swarm;

pub use error::{Result, SbiError};
pub use lifecycle::{run, run_observed, RunReport};
pub use objectives::{benchmark, Domain, Objective};
pub use schemes::{SbgdParams, SchemeKind};
pub use swarm::{AgentState, SwarmConfig, SwarmState};
