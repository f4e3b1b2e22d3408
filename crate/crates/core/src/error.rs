//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, model, Hamiltonian and DoS operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Lattice basis matrix is singular (or numerically indistinguishable from it).
    #[error("singular lattice basis: |det A| = {det:.3e}")]
    SingularBasis { det: f64 },

    /// A scalar or structural argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The model violates one of its declared properties (decay bound, row sums, ...).
    #[error("model validation failed: {0}")]
    ModelValidation(String),

    /// The hopping function is not Hermitian-consistent at assembly time.
    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    /// Vector length does not match the operator dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Dense-matrix operation requested above the supported size.
    #[error("matrix too large for dense operation: n = {n}, limit = {limit}")]
    SizeExceeded { n: usize, limit: usize },

    /// The requested center degree of freedom does not exist in the cluster.
    #[error("center degree of freedom not found: {0}")]
    MissingCenterDof(String),

    /// The Chebyshev recursion left [-1, 1]; the spectral window was violated.
    #[error("spectral window violation: {0}")]
    SpectralWindowViolation(String),

    /// Energy samples fall outside the guarded reconstruction window.
    #[error("energies outside the scaled spectral window (|eta*eps| > 1 - 1e-6): {0:?}")]
    OutOfWindow(Vec<f64>),

    /// Too few lattice sites for a statistically meaningful result.
    #[error("insufficient sample: {found} sites in ball, need at least {need}")]
    InsufficientSample { found: usize, need: usize },

    /// An observable evaluator returned a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Model configuration file could not be parsed or is incomplete.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
