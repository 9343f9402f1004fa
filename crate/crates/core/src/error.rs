use thiserror::Error;

/// Errors produced by the reduction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension mismatch: {context} (left {left_rows}x{left_cols}, right {right_rows}x{right_cols})")]
    DimensionMismatch {
        context: String,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("non-finite entry at ({row},{col}) in {context}")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("eigendecomposition failed for a {n}x{n} matrix (best residual {residual:.3e})")]
    EigFailure { n: usize, residual: f64 },

    #[error("linear solve on singular-to-tolerance matrix (condition estimate {cond_estimate:.3e})")]
    SingularMatrix { cond_estimate: f64 },

    #[error("simulation diverged at step {step} (|entry| exceeded {cap:.1e})")]
    Divergence { step: usize, cap: f64 },

    #[error("index {index} out of range for {context} of size {size}")]
    IndexOutOfRange {
        context: String,
        index: usize,
        size: usize,
    },

    #[error("requested {requested} items from a pool of {available} ({context})")]
    PoolExhausted {
        context: String,
        requested: usize,
        available: usize,
    },

    #[error("requested order {order} exceeds numerical rank {rank} (rank_tol {rank_tol:.1e})")]
    RankShortfall {
        order: usize,
        rank: usize,
        rank_tol: f64,
    },

    #[error("no eigenvalue pairs matched within tolerance {match_tol:.3e}")]
    EmptyIntersection { match_tol: f64 },

    #[error("biorthogonalization breakdown at column {column} (pairing magnitude {pairing:.3e})")]
    BiorthogonalBreakdown { column: usize, pairing: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("explicit scheme unstable for dt {dt}: maximum stable dt is {max_stable_dt:.6e}")]
    CflViolation { dt: f64, max_stable_dt: f64 },

    #[error("all {runs} repeated runs were rank-deficient below order {order}")]
    AllRunsRankDeficient { runs: usize, order: usize },

    #[error("could not draw a well-conditioned basis after {attempts} attempts (last condition {cond:.3e})")]
    ConditioningFailure { attempts: usize, cond: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
