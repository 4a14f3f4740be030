use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// A single violated invariant found while validating problem data.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("`{0}` is not symmetric")]
    NotSymmetric(&'static str),
    #[error("`{0}` is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("`{0}` is not positive semidefinite")]
    NotPositiveSemidefinite(&'static str),
    #[error("`{0}` has a non-finite entry")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<Violation>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value {value} is outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("quadrature failed: error estimate {estimate:e} exceeds target {target:e}")]
    QuadratureFailure { estimate: f64, target: f64 },
    #[error("no feasible tau found up to {cap:e}")]
    NoFeasibleTau { cap: f64 },
    #[error("step index {index} out of range for horizon {horizon}")]
    IndexOutOfRange { index: usize, horizon: usize },
}

fn join(v: &[Violation]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{x}");
    }
    out
}
