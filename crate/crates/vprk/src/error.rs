//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:.3e} below tolerance {tol:.3e}")]
    SingularMatrix { pivot: f64, tol: f64 },

    #[error("unknown tableau '{0}' (expected midpoint, trapezoidal, gauss2 or gauss3)")]
    UnknownTableau(String),

    #[error("unknown field '{0}'")]
    UnknownField(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("change-of-variables matrix P is singular")]
    SingularP,

    #[error("Newton iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    NewtonDivergence { iters: usize, residual: f64 },

    #[error("Newton stage matrix is singular (step size too large)")]
    SingularNewtonMatrix,

    #[error("Kahan system matrix is singular")]
    SingularKahanMatrix,

    #[error("stage system matrix I - h(A (x) I)F is singular")]
    SingularStageMatrix,

    #[error("denominator det(I - (h/2) f'(x)) vanishes")]
    SingularDenominator,

    #[error("tableau does not satisfy the delta condition (confluent abscissae or pair-dependent delta)")]
    DeltaConditionViolated,

    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("density is nonpositive ({value:.3e}) at an evaluation point")]
    NonpositiveDensity { value: f64 },

    #[error("unknown experiment '{0}' (try `vprk list`)")]
    UnknownExperiment(String),

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("internal consistency check '{context}' failed: deviation {value:.3e}")]
    Inconsistency { context: &'static str, value: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
