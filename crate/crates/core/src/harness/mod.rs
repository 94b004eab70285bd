//! Monte-Carlo experiment runner behind the `sbi` binary.

pub mod batch;
pub mod config;
pub mod presets;
pub mod report;
pub mod verify;

pub use batch::{classify_success, initialize_swarm, run_batch, trial_seed, Prepared};
pub use config::{BoxSpec, ExperimentConfig, MethodSpec, SuccessCriterion, SuccessMode};
pub use presets::{default_success, table_preset, TABLE_NAMES};
pub use report::{emit_report, emit_reports, read_reports, ExperimentReport, TrialRecord};

use crate::swarm::SwarmConfig;

/// Swarm parameters for the d-dimensional benchmark tables: the first
/// experiment's settings (`w = 1e-4`, `R = 1`, `κ = 10`, `h = 0.5`).
pub fn high_dim_swarm() -> SwarmConfig {
    SwarmConfig::default()
}
