use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value} for {kind}: {reason}")]
    InvalidParameter {
        kind: &'static str,
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("missing parameter {name} for {kind}")]
    MissingParameter { kind: String, name: &'static str },
    #[error("unknown kind {0:?}")]
    UnknownKind(String),
    #[error("cannot refine by projection: requested truncation {requested} exceeds {available}")]
    CannotRefine { requested: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("box is empty or malformed")]
    EmptyBox,
    #[error("exponents p = {p}, q = {q} are invalid")]
    InvalidExponents { p: f64, q: f64 },
    #[error("noise covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("effective sample size zero")]
    ZeroEffectiveSampleSize,
    #[error("posteriors do not share the same prior and truncation")]
    IncompatiblePriors,
    #[error("no convergence after {iterations} iterations (last step {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
