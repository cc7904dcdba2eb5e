//! Error type shared by all modules.

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-Hermitian: residual {residual:.3e} exceeds {tol:.3e}")]
    NotSkewHermitian { residual: f64, tol: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("scalar function evaluates non-finite at eigenvalue {eigenvalue}")]
    SingularFunctionValue { eigenvalue: Complex64 },

    #[error("matrix contains non-finite entries")]
    NonFiniteMatrix,

    #[error("operator is not real: imaginary residual {residual:.3e}")]
    NotRealOperator { residual: f64 },

    #[error("invalid system: {reason}")]
    InvalidSystem { reason: String },

    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },

    #[error(
        "fixed-point iteration diverged after {iterations} iterations (residual {residual:.3e})"
    )]
    FixedPointDiverged { iterations: u32, residual: f64 },

    #[error("RK coefficients are not symplectic: condition residual {residual:.3e}")]
    NotSymplecticRK { residual: f64 },

    #[error("unknown method {name:?} (expected EI-T or EI-O1..EI-O5)")]
    UnknownMethod { name: String },

    #[error("resonance enumeration budget exceeded: {points} lattice points")]
    CombinatorialBudgetExceeded { points: u128 },

    #[error("sampling too coarse for requested frequencies: h*max|k.w| = {product:.3e} > 1")]
    AliasedSampling { product: f64 },

    #[error("modal fit window too short: {len} samples, need at least {required}")]
    WindowTooShort { len: usize, required: usize },

    #[error("modal fit design matrix ill-conditioned: cond = {cond:.3e}")]
    IllConditionedBasis { cond: f64 },

    #[error("step halving did not reach tolerance: best agreement {achieved:.3e}")]
    ToleranceNotReached { achieved: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{failures} sweep run(s) failed")]
    SweepFailed { failures: usize, numerical: bool },

    #[error("config error: {reason}")]
    Config { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(reason: impl Into<String>) -> Self {
        Error::Config {
            reason: reason.into(),
        }
    }

    pub fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical process itself, as opposed to bad
    /// inputs or configuration. The CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::FixedPointDiverged { .. }
                | Error::SingularFunctionValue { .. }
                | Error::ToleranceNotReached { .. }
                | Error::IllConditionedBasis { .. }
                | Error::StepFailed { .. }
                | Error::SweepFailed {
                    numerical: true,
                    ..
                }
        )
    }
}
