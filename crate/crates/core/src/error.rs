use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CasbahError>;

#[derive(Debug, Error)]
pub enum CasbahError {
    /// Malformed or out-of-range input.
    #[error("input error: {0}")]
    Input(String),

    /// A linear-algebra or sampling failure that jitter could not repair.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Raised by the sampler; carries where in the chain the failure happened.
    #[error("chain failed at iteration {iteration} in step {step}: {source}")]
    Chain {
        iteration: usize,
        step: &'static str,
        #[source]
        source: Box<CasbahError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CasbahError {
    pub fn input(msg: impl Into<String>) -> Self {
        CasbahError::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CasbahError::Numerical(msg.into())
    }

    /// Process exit code: 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CasbahError::Input(_) | CasbahError::Io { .. } => 2,
            CasbahError::Numerical(_) => 3,
            CasbahError::Chain { source, .. } => source.exit_code(),
        }
    }
}
