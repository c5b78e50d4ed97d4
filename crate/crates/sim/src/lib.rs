//! Experiment harness around `ristrain-core`: configuration, Monte Carlo
//! sweeps, convergence traces, design dumps and an invariant suite.

pub mod config;
pub mod error;
pub mod experiment;
pub mod table;
pub mod validate;

pub use config::{ConfigError, ExperimentConfig, Profile, Resolved};
pub use error::SimError;
pub use experiment::{run_convergence, run_design, run_sweep, summarize, ConvergenceRow, ResultRow, SummaryRow};
