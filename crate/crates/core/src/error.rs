use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("physical dimension mismatch: {left} vs {right}")]
    PhysicalDimension { left: usize, right: usize },
    #[error("dense expansion of {dim} x {dim} exceeds the cap of {cap}")]
    DenseCap { dim: usize, cap: usize },
    #[error("expansion order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("missing time-ordered integral for channel sequence {0:?}")]
    MissingBracket(Vec<usize>),
    #[error("least-squares residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("quadrature did not reach tolerance {tol:e} within {evals} evaluations")]
    QuadratureBudget { tol: f64, evals: usize },
    #[error("bond dimension cap {cap} exceeded before reaching tolerance")]
    BondCap { cap: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
