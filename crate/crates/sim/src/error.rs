use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] ristrain_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} invariant check(s) failed")]
    Invariants(usize),
}

impl SimError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Numerical(_) | SimError::Invariants(_) => 3,
            SimError::Io(_) | SimError::Csv(_) => 1,
        }
    }

    /// The reader went away, e.g. output piped into `head`.
    pub fn is_broken_pipe(&self) -> bool {
        let kind = match self {
            SimError::Io(e) => Some(e.kind()),
            SimError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e.kind()),
                _ => None,
            },
            _ => None,
        };
        kind == Some(std::io::ErrorKind::BrokenPipe)
    }
}
