use thiserror::Error;

use crate::structure::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown symmetry class label `{0}`")]
    UnknownLabel(String),
    #[error("invalid n = {n}: {reason}")]
    InvalidN { n: usize, reason: String },
    #[error("class {0} is chiral and requires s")]
    MissingS(String),
    #[error("class {0} is not chiral and takes no s")]
    UnexpectedS(String),
    #[error("invalid s = {s} for n = {n}: need 1 <= s <= n - s")]
    InvalidS { s: usize, n: usize },
    #[error("sigma2 must be positive and finite, got {0}")]
    NonPositiveSigma(f64),
    #[error("expected {expected} free parameters, got {got}")]
    WrongParamCount { expected: usize, got: usize },
    #[error("matrix is not in the class space: {}", fmt_violations(.0))]
    StructureViolation(Vec<Violation>),
    #[error("matrix does not match ensemble: {0}")]
    EnsembleMismatch(String),
    #[error("no stabilizer embedding implemented for class {0}")]
    UnsupportedClass(String),
    #[error("reps must be at least 1")]
    InvalidReps,
    #[error("eigenvalue iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("could not reduce spectrum to {expected} values (got {got}); offending gaps {gaps:?}")]
    DegenerateSpectrum {
        expected: usize,
        got: usize,
        gaps: Vec<f64>,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("value {0} lies outside the support")]
    OutOfSupport(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("unsupported gamma {0}; expected 1 or 2")]
    UnsupportedGamma(u32),
    #[error("measure charges a zero of the weight at {0}")]
    DivergentField(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{} (residual {:e})", v.constraint, v.residual))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
