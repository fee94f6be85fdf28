//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building bases, estimating, or running studies.
#[derive(Error, Debug)]
pub enum CvmcError {
    /// An integrand or basis function produced NaN or infinity where a finite
    /// value was required (quadrature nodes, oracle integrals).
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    /// The population Gram matrix of the basis is not positive definite to
    /// working precision.
    #[error("gram matrix is rank deficient (smallest eigenvalue {lambda_min:e})")]
    RankDeficient { lambda_min: f64 },

    /// The sampled design matrix is numerically column-rank-deficient, so the
    /// least squares system has no stable solution.
    #[error("sample design matrix is numerically singular")]
    SingularGram,

    /// The constant vector is (numerically) inside the span of the sampled
    /// basis columns; the estimator's denominator collapses.
    #[error("ones vector lies in the span of the basis columns (denominator {denom:e})")]
    OnesInColumnSpace { denom: f64 },

    /// Fewer samples than coefficients to fit plus one residual degree of freedom.
    #[error("need at least m + 2 = {required} samples, got n = {n}")]
    InsufficientSamples { n: usize, required: usize },

    /// A normality study was asked to standardize by a residual standard
    /// deviation that is exactly or numerically zero.
    #[error("residual variance is zero; standardized statistics are undefined")]
    DegenerateSigma,

    /// More than the tolerated fraction of replications failed.
    #[error("study aborted: {failures} of {reps} replications failed")]
    StudyAborted { failures: usize, reps: usize },

    /// Samples, basis, and integrand must all live on the same domain; bases
    /// are never rescaled implicitly.
    #[error("domain mismatch: {msg}")]
    DomainMismatch { msg: String },

    /// A configuration value (schedule expression, grid, option combination)
    /// does not describe a runnable computation.
    #[error("invalid specification: {msg}")]
    InvalidSpec { msg: String },

    /// Command-line arguments did not parse; the message names the offending
    /// flag and the expected format.
    #[error("{msg}")]
    Usage { msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CvmcError>;
