use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its documented range.
    InvalidArgument(String),
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// Negative-order dotted norms are only defined on zero-mean fields.
    NonzeroMean {
        mean: f64,
    },
    DegenerateCell {
        cell: usize,
        measure: f64,
    },
    /// Factorization broke down at the given pivot.
    Factorization {
        pivot: usize,
        value: f64,
    },
    SolverFailed {
        iterations: usize,
        residual: f64,
    },
    DenseLimitExceeded {
        dofs: usize,
        limit: usize,
    },
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    StepFailed {
        step: usize,
        source: Box<Error>,
    },
    FactorMismatch {
        steps: usize,
        factor: usize,
    },
    NotAdmissible {
        exponent: f64,
    },
    InvalidPotential(String),
    ZeroInput,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonzeroMean { mean } => write!(
                f,
                "negative-order seminorm requires a zero-mean field (mean coefficient {mean:e})"
            ),
            Error::DegenerateCell { cell, measure } => {
                write!(f, "cell {cell} is degenerate (measure {measure:e})")
            }
            Error::Factorization { pivot, value } => {
                write!(f, "factorization broke down at pivot {pivot} (value {value:e})")
            }
            Error::SolverFailed { iterations, residual } => write!(
                f,
                "linear solver failed after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::DenseLimitExceeded { dofs, limit } => write!(
                f,
                "{dofs} degrees of freedom exceed the dense eigensolver limit {limit}; \
                 use the iterative negative-norm path instead"
            ),
            Error::NewtonDiverged { iterations, residual, .. } => write!(
                f,
                "Newton iteration did not converge in {iterations} iterations (residual {residual:e})"
            ),
            Error::StepFailed { step, source } => write!(f, "step {step} failed: {source}"),
            Error::FactorMismatch { steps, factor } => {
                write!(f, "refinement factor {factor} does not divide {steps} fine steps")
            }
            Error::NotAdmissible { exponent } => write!(
                f,
                "noise covariance is not admissible: ||A^{exponent} Q^(1/2)||_HS diverges"
            ),
            Error::InvalidPotential(msg) => write!(f, "invalid potential: {msg}"),
            Error::ZeroInput => write!(f, "input field is zero"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::StepFailed { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
