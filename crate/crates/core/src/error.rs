use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "perfect separation detected at Newton iteration {iteration} (|gamma|_inf = {norm:.3})"
    )]
    SeparationDetected { iteration: usize, norm: f64 },

    #[error("observed information matrix is not invertible")]
    SingularInformation,

    #[error("Newton-Raphson did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("MCMC chain produced a non-finite log-posterior at iteration {iteration}")]
    ChainDiverged { iteration: usize },

    #[error("at least {required} posterior draws are required, got {found}")]
    InsufficientDraws { required: usize, found: usize },

    #[error("no treated units")]
    NoTreatedUnits,

    #[error("no control units available for matching")]
    EmptyControlPool,

    #[error("matched sample is empty{}", draw.map(|k| format!(" (posterior draw {k})")).unwrap_or_default())]
    EmptyMatchSet { draw: Option<usize> },

    #[error("{failed} of {total} bootstrap replicates failed (more than 10%)")]
    ReplicateFailed { failed: usize, total: usize },

    #[error("{failed} of {total} replications failed (more than 2%); first failure in replication {first}: {cause}")]
    ReplicationFailed {
        failed: usize,
        total: usize,
        first: usize,
        cause: String,
    },
}
