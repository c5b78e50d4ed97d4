//! Joint design of pilot sequences and reflection patterns for cascaded
//! channel estimation through a reconfigurable surface whose reflection
//! amplitude depends on the applied phase shift.
//!
//! Everything here is `no_std` with `alloc`. IO, timing and the command line
//! live in the companion `ristrain` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod accel;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod lmmse_design;
pub mod ls_design;
pub mod numerics;
pub mod phase_model;
pub mod system;
pub mod trace;

pub use error::{Error, Result};
pub use numerics::{CMatrix, HermitianMatrix, C64};
pub use phase_model::{CircuitParams, ReflectionModel};
pub use system::{Estimator, ReflectionPattern, SystemDims, TrainingMatrix};
pub use trace::{DesignOptions, DesignTrace, IterationRecord};
