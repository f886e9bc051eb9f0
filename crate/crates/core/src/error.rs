use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e} > {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("density operator trace is {trace}, expected 1")]
    InvalidTrace { trace: f64 },

    #[error("density operator has negative eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailed,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("level populations sum to {sum}, expected 1")]
    Normalization { sum: f64 },

    #[error("invalid protocol: {0}")]
    Protocol(String),

    #[error(
        "absolute continuity violated: forward outcome (k={k}, l={l}) has probability {p_forward:.3e} \
         but the reference level l has zero probability"
    )]
    AbsoluteContinuity { k: usize, l: usize, p_forward: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
