use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable x{index} is out of range for a {dim}-dimensional patch")]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),

    #[error("non-finite value at node {node:?}")]
    NonFinite { node: Vec<usize> },

    #[error("invalid patch: {0}")]
    InvalidPatch(String),

    #[error("patch too coarse: axis {axis} has {resolution} points, at least 5 are required")]
    TooCoarse { axis: usize, resolution: usize },

    #[error("fields live on different patches")]
    PatchMismatch,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point {point:?} lies outside the patch")]
    OutsidePatch { point: Vec<f64> },

    #[error("exact differentiation unavailable: {0}")]
    ModeUnavailable(String),

    #[error("not an almost-complex structure: |J^2 + E| = {residual:e} at node {node:?}")]
    InvalidStructure { residual: f64, node: Vec<usize> },

    #[error("{what} is singular at node {node:?}{}", hint.as_deref().map(|h| format!(" ({h})")).unwrap_or_default())]
    Singular {
        what: String,
        node: Vec<usize>,
        hint: Option<String>,
    },

    #[error("twistor coefficients are off the unit sphere: b^2 + c^2 + d^2 = {norm_sq}")]
    OffSphere { norm_sq: f64 },

    #[error("structures do not anticommute: |JK + KJ| = {residual:e} at node {node:?}")]
    NotHypercomplex { residual: f64, node: Vec<usize> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("ellipticity violated: xi^T A xi = {value} at node {node:?} for xi = {xi:?}")]
    EllipticityViolated {
        value: f64,
        node: Vec<usize>,
        xi: Vec<f64>,
    },

    #[error("csv: {0}")]
    Csv(String),
}

/// Runtime failures of expression evaluation.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    SqrtOfNegative,
    #[error("logarithm of a non-positive number")]
    LogOfNonPositive,
    #[error("variable x{0} has no value")]
    MissingVariable(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
