use thiserror::Error;

use crate::simplicial::Simplex;

/// Errors raised by every layer of the library.
#[derive(Debug, Error)]
pub enum FeecError {
    #[error("empty complex")]
    EmptyComplex,

    #[error("degenerate cell {0:?}")]
    DegenerateCell(Vec<usize>),

    #[error("simplex {0} is not in the complex")]
    SimplexNotFound(Simplex),

    #[error("{face} is not a face of {host}")]
    NotAFace { face: Simplex, host: Simplex },

    #[error("degree {degree} out of range (valid: {min}..={max})")]
    DegreeOutOfRange { degree: usize, min: usize, max: usize },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("host mismatch: {left} vs {right}")]
    HostMismatch { left: Simplex, right: Simplex },

    #[error("use the 0-form identity u - u(x_0) = A du")]
    KoszulOfFunction,

    #[error("form is not closed")]
    NotClosed,

    #[error("not a complex: d^{degree} composed with d^{prev} is non-zero", prev = .degree.wrapping_sub(1))]
    NotAComplex { degree: usize },

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("not a subcomplex: {0}")]
    NotSubcomplex(String),

    #[error("span not d-stable in degree {degree}")]
    SpanNotDStable { degree: usize },

    #[error("invalid realization: simplex {simplex} has affine span of dimension {rank}")]
    InvalidRealization { simplex: Simplex, rank: usize },

    #[error("degenerate simplex {0}: zero volume")]
    DegenerateSimplex(Simplex),

    #[error("harmonic/betti mismatch in degree {degree}: numerical nullspace {found}, betti {expected}")]
    HarmonicBettiMismatch { degree: usize, found: usize, expected: usize, singular_values: Vec<f64> },

    #[error("solver breakdown: {what} (condition estimate {condition:e})")]
    SolverBreakdown { what: String, condition: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl FeecError {
    /// Short machine-readable kind used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            FeecError::EmptyComplex => "empty_complex",
            FeecError::DegenerateCell(_) => "degenerate_cell",
            FeecError::SimplexNotFound(_) => "simplex_not_found",
            FeecError::NotAFace { .. } => "not_a_face",
            FeecError::DegreeOutOfRange { .. } => "degree_out_of_range",
            FeecError::DegreeMismatch { .. } => "degree_mismatch",
            FeecError::HostMismatch { .. } => "host_mismatch",
            FeecError::KoszulOfFunction => "koszul_of_function",
            FeecError::NotClosed => "not_closed",
            FeecError::NotAComplex { .. } => "not_a_complex",
            FeecError::Shape(_) => "shape",
            FeecError::NotSubcomplex(_) => "not_subcomplex",
            FeecError::SpanNotDStable { .. } => "span_not_d_stable",
            FeecError::InvalidRealization { .. } => "invalid_realization",
            FeecError::DegenerateSimplex(_) => "degenerate_simplex",
            FeecError::HarmonicBettiMismatch { .. } => "harmonic_betti_mismatch",
            FeecError::SolverBreakdown { .. } => "solver_breakdown",
            FeecError::InvalidParameter(_) => "invalid_parameter",
            FeecError::Parse(_) => "parse",
            FeecError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, FeecError>;
