//! Error type shared by every pricing module.

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("time increment must be positive, got {0}")]
    NonpositiveDt(f64),

    #[error("reversed integration interval [{t0}, {t1}]")]
    ReversedInterval { t0: f64, t1: f64 },

    #[error("covariance matrix is not positive semidefinite (leading minor {minor})")]
    NotPsd { minor: usize },

    #[error("node ({step}, {node}) is outside the tree")]
    NodeOutOfRange { step: usize, node: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("exercise date {0} does not lie on the lattice time grid")]
    ExerciseDateOffLattice(f64),

    #[error("contract does not allow surrender")]
    SurrenderDisabled,

    #[error("rate axis is degenerate (omega = 0)")]
    DegenerateRateAxis,

    #[error("regression needs at least {required} paths, got {actual}")]
    TooFewPaths { required: usize, actual: usize },

    #[error("kernel matrix is singular even after jitter escalation")]
    SingularKernel,
}
