use std::path::PathBuf;

/// Errors raised by the numerical operators and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cube side {side} is below the resolution limit {min} (two grid spacings)")]
    SubResolutionCube { side: f64, min: f64 },

    #[error("cube does not intersect the domain box")]
    CubeOutsideDomain,

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Luxemburg bracket did not close after {0} doublings")]
    NormNotConverged(usize),

    #[error("ill-conditioned monomial basis (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("kernel evaluated at the origin")]
    KernelAtOrigin,

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    DerivativeOrder { order: usize, max: usize },

    #[error("sample point at distance {distance} is closer than {min} to the atom cube")]
    TooCloseToSupport { distance: f64, min: f64 },

    #[error("grid margin {margin} around the atom is below the required {required}")]
    MarginViolation { margin: f64, required: f64 },

    #[error("atom construction failed after {0} draws")]
    DegenerateAtom(usize),

    #[error("no admissible scale for the evaluation point")]
    NoAdmissibleScale,

    #[error("singular linear system")]
    Singular,

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed grid file {path}: {reason}")]
    GridFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
