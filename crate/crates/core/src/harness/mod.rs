//! Experiment drivers, configuration, statistics and persistence.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod record;
pub mod stats;

pub use config::{Experiment, ExperimentConfig, OutputFormat};
pub use experiments::{
    check_acceptance_floor, run_branch_boundary, run_enumerate_lattice, run_experiment,
    run_gst_check, run_lifetime_tail, run_pair_mrca, run_shape_frequencies, run_skeleton_density,
    run_survival, RunOutput,
};
pub use record::{Cell, Check, ExperimentRecord, KsEntry, Metadata};
pub use stats::{EmpiricalSummary, MeanAcc};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("acceptance rate {rate:.3e} below the floor {floor:.3e}")]
    AcceptanceFloor { rate: f64, floor: f64 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("simulation error: {0}")]
    Simulation(String),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Budget(_) => 3,
            HarnessError::AcceptanceFloor { .. } => 4,
            HarnessError::Io(_) | HarnessError::Simulation(_) => 1,
        }
    }
}
