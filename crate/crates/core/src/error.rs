use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ill-conditioned group element (norm {0:e})")]
    IllConditioned(f64),

    #[error("window exceeded; enlarge window ({0})")]
    WindowExceeded(String),

    #[error("window is near-singular: c^2+d^2 = {0:e} below 1e-6")]
    NearSingularWindow(f64),

    #[error("observable has no window attached; norm-dependent checks need one")]
    NoWindow,

    #[error("observable is not a Casimir eigenfunction")]
    NotEigenfunction,

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("word reduction did not terminate within {0} steps")]
    ReductionCap(usize),

    #[error("relator check failed: residual {0:e}")]
    Relator(f64),

    #[error("estimate undefined: {0}")]
    Degenerate(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
