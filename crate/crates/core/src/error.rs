use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("m must be at least 1: the formula needs a derivative at the new time point")]
    NoImplicitDerivative,
    #[error("scheme parameters must be non-negative (got l = {l}, m = {m})")]
    Negative { l: i64, m: i64 },
    #[error("l + m = {} exceeds the supported maximum {max}", l + m)]
    OrderTooHigh { l: usize, m: usize, max: usize },
    #[error("amplification function has a pole at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },
}

#[derive(Debug, Error)]
pub enum DaeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid system JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("unknown element '{letter}' at line {line}")]
    UnknownElement { letter: char, line: usize },
    #[error("malformed number '{token}' at line {line}")]
    MalformedNumber { token: String, line: usize },
    #[error("duplicate element name '{name}' at line {line}")]
    DuplicateName { name: String, line: usize },
    #[error("bad node id '{token}' at line {line}")]
    BadNode { token: String, line: usize },
    #[error("wrong number of fields at line {line}: {detail}")]
    Fields { line: usize, detail: String },
    #[error("element value must be positive and finite at line {line}")]
    NonPositiveValue { line: usize },
    #[error("source '{name}' at line {line} has both terminals on node {node}")]
    ShortedSource {
        name: String,
        node: usize,
        line: usize,
    },
    #[error("netlist contains no elements")]
    Empty,
    #[error("sources use different frequencies ({first} Hz and {second} Hz)")]
    MixedFrequencies { first: f64, second: f64 },
    #[error("node {node} is floating (no capacitive or conductive connection)")]
    FloatingNode { node: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PencilError {
    #[error("pencil is singular: det(G + lambda C) vanishes identically")]
    Singular,
    #[error("core/nilpotent split is ill-conditioned: {0}")]
    IllConditionedSplit(String),
    #[error("C and G must be square and of equal size ({0})")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("augmented system is singular (h = {h}, l = {l}, m = {m})")]
    Singular { h: f64, l: usize, m: usize },
    #[error("previous state holds {have} derivative blocks but the scheme needs {need}")]
    InsufficientHistory { have: usize, need: usize },
    #[error("step size must be positive and finite (got {0})")]
    InvalidStep(f64),
    #[error("step count must be at least 1")]
    NoSteps,
    #[error("initial-value start needs a nonsingular C matrix")]
    SingularC,
    #[error("state dimension {got} does not match system dimension {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteadyStateError {
    #[error("G + j*omega*C is singular at omega = {omega} (resonant frequency)")]
    Resonant { omega: f64 },
}

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("too few samples above the roundoff floor for derivative order {order}: {usable} usable, 4 needed")]
    TooFewSamples { order: usize, usable: usize },
    #[error("invalid step grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
    #[error(transparent)]
    Pencil(#[from] PencilError),
}
