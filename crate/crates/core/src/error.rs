use thiserror::Error;

/// Errors raised by the estimation kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("system matrix is not stable (spectral radius {0:.6})")]
    Unstable(f64),

    #[error("singular design: smallest eigenvalue of the empirical covariance is {0:.3e}")]
    SingularDesign(f64),

    #[error("design matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("target accuracy is unreachable: the rank-{rank} tail {tail:.6e} is not below {threshold:.6e}")]
    Infeasible { rank: usize, tail: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
