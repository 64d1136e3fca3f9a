use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("density is zero or non-finite at z = {z}")]
    NonFiniteDensity { z: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value}, error {abs_err}")]
    QuadratureFailure { a: f64, b: f64, value: f64, abs_err: f64 },

    #[error("argument outside the admissible domain: {0}")]
    DomainError(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("moment of order {order} is undefined (1 - k*alpha <= 0 at k = {k})")]
    MomentUndefined { order: u32, k: u32 },

    #[error("unknown law '{0}'")]
    UnknownLaw(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("g*(x) rho(x) underflows at x = {x}")]
    UnstableDenominator { x: f64 },

    #[error("operation requires full-line support")]
    UnsupportedSupport,

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("kernel order mismatch: {0}")]
    OrderMismatch(String),

    #[error("contraction rank {r} exceeds min(p, q) = {max}")]
    RankError { r: usize, max: usize },

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("functional is not centered (mean {0})")]
    NonCentered(f64),

    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("circulant embedding is not positive semidefinite (min eigenvalue {0})")]
    EmbeddingNotPSD(f64),

    #[error("first Hermite coefficient E[Z f(Z)] vanishes (c1 = {0})")]
    SigmaZero(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
