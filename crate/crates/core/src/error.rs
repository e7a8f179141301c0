use thiserror::Error;

/// Every fallible operation in the crate returns this.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight at ({i}, {j}) is negative: {w}")]
    NegativeWeight { i: usize, j: usize, w: f64 },
    #[error("weight at ({i}, {j}) is not finite")]
    NonFiniteWeight { i: usize, j: usize },
    #[error("vertex index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graph kind {kind} cannot hold weight {w} at ({i}, {j})")]
    KindViolation { kind: &'static str, i: usize, j: usize, w: f64 },
    #[error("graph is not strongly connected ({components} components)")]
    NotStronglyConnected { components: usize },
    #[error("no convergence after {iterations} sweeps, residual stuck at {plateau:.3e}")]
    NoConvergence { iterations: usize, plateau: f64 },
    #[error("vertex {vertex} has no outgoing edge")]
    DanglingVertex { vertex: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("problem too large: {size} exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("defect pattern leaves a periodic or disconnected lattice")]
    AllDefected,
    #[error("graph is inconsistent with a lattice: {0}")]
    InconsistentGraph(String),
    #[error("amplitude at time {t}, vertex {vertex} is not positive")]
    NonPositiveAmplitude { t: usize, vertex: usize },
    #[error("state is not adiabatic: max |phi - psi| = {gap:.3e}")]
    NotAdiabatic { gap: f64 },
    #[error("configuration weights are not exchange symmetric")]
    NotExchangeSymmetric,
    #[error("support of q is not contained in the support of p")]
    SupportMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
