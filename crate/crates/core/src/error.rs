use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample grid of {grid} points is too small for truncation order {n_trunc} (need at least {required})")]
    GridTooSmall {
        grid: usize,
        n_trunc: usize,
        required: usize,
    },
    #[error("truncation order must be positive")]
    ZeroTruncation,
    #[error("mode index {0} is zero or outside the truncation")]
    BadMode(i64),
    #[error("truncation mismatch: {0} vs {1}")]
    TruncationMismatch(usize, usize),
    #[error("not an orientation preserving diffeomorphism: min derivative {0:.3e}")]
    NotOrientationPreserving(f64),
    #[error("inverse of circle map did not converge at theta = {0}")]
    InverseDiverged(f64),
    #[error("matrix is numerically singular")]
    Singular,
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("vector field is not real-valued (residual {0:.3e})")]
    ComplexField(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
