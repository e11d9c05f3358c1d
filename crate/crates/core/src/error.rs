use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("Jacobi identity fails on basis triple ({0}, {1}, {2})")]
    JacobiViolation(usize, usize, usize),

    #[error("structure constants violate the grading: [v{i}, v{j}] has a component on v{h}")]
    GradingViolation { i: usize, j: usize, h: usize },

    #[error("algebra is not stratified: {0}")]
    NotStratified(String),

    #[error("degenerate control basis: Gram rank {rank} < {n}")]
    DegenerateBasis { rank: usize, n: usize },

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("search exhausted after {draws} draws; best smallest singular value {best:e}")]
    SearchExhausted { draws: usize, best: f64 },

    #[error("tolerance budget infeasible: {0}")]
    BudgetInfeasible(String),

    #[error("block {block} violates the norm bound: sup {sup:e} > {bound:e}")]
    BlockNorm { block: usize, sup: f64, bound: f64 },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Parses JSON text, reporting failures with their line and column.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}
