use thiserror::Error;

/// Errors produced by the eigendecomposition, gradient and layer routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (non-finite entries, bad
    /// hyperparameter, skipped eigenvalue clamp, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Dimensions of two related arguments do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The iterative eigensolver exhausted its sweep budget.
    #[error("eigensolver did not converge: off-diagonal residual {residual:.3e} after {sweeps} sweeps")]
    Convergence { residual: f64, sweeps: usize },

    /// Power iteration hit a numerically zero image `M v`.
    #[error("power iteration breakdown: |Mv| = {norm:.3e}")]
    Breakdown { norm: f64 },

    /// A stateful layer was used in a way its lifecycle does not allow.
    #[error("layer state: {0}")]
    State(String),

    /// A finite-difference probe evaluated the loss to a non-finite value.
    #[error("finite-difference probe produced a non-finite loss at entry ({row}, {col})")]
    OracleProbe { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
