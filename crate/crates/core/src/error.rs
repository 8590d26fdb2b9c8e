//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical routines.
///
/// Each variant maps onto one CLI exit status (see [`Error::exit_code`]) and one
/// FFI status code, so callers in other languages can branch on the kind.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument sits on (or numerically at) a pole of the function.
    #[error("pole: {0}")]
    Pole(String),
    /// A parameter lies outside the documented domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter is within the guard radius of an excluded half-integer.
    #[error("half-integer pole: {0}")]
    HalfIntegerPole(String),
    /// An iterative sum or refinement loop hit its cap before meeting the tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A truncation dimension is too small or otherwise invalid.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    /// A truncated operator is not numerically invertible.
    #[error("singular operator: minimum singular value {0:e}")]
    SingularOperator(f64),
    /// The composition sum of the derivative formula has too many terms.
    #[error("combinatorial blowup: {0} compositions exceed the cap")]
    CombinatorialBlowup(f64),
    /// The symmetric eigenvalue iteration failed to converge.
    #[error("eigenvalue iteration failed: {0}")]
    EigenFailure(String),
    /// The shift λ is too close to the negative of a computed eigenvalue.
    #[error("near pole: {0}")]
    NearPole(String),
    /// An argument vector has the wrong length.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    /// An integrand returned a non-finite value at an interior node.
    #[error("integrand not finite at node {0:?}")]
    NodeSingularity(Vec<f64>),
    /// The coupling lies outside the convergence radius of the Δ-series.
    #[error("radius exceeded: |X|·C = {ratio} ≥ 1")]
    RadiusExceeded { ratio: f64 },
    /// Two independent evaluations of the same closed form disagreed.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence(_) | Error::EigenFailure(_) => 3,
            _ => 2,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
