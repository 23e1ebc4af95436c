use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid signature: n = {n}, m = {m}")]
    InvalidSignature { n: usize, m: usize },

    #[error("degree overflow: {k} + {l} exceeds dimension {n}")]
    DegreeOverflow { k: usize, l: usize, n: usize },

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate metric (det = {det:e})")]
    DegenerateMetric { det: f64 },

    #[error("metric determinant has the wrong sign for signature m = {m} (det = {det:e})")]
    WrongSignature { det: f64, m: usize },

    #[error("levi-civita contraction needs k + l = n, got {k} + {l} != {n}")]
    LeviDegrees { k: usize, l: usize, n: usize },

    #[error("grid mismatch")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("band limit {max_mode} too large for grid (need K <= min(N_i)/4 = {limit})")]
    BandLimit { max_mode: usize, limit: usize },

    #[error("induced metric not positive definite at point {point} (coords {coords:?})")]
    NotPositiveDefinite { point: usize, coords: [usize; 3] },

    #[error("singular cotetrad{}", .point.map(|p| format!(" at point {p}")).unwrap_or_default())]
    SingularCotetrad { point: Option<usize> },

    #[error("non-positive lapse N = {lapse:e}{}", .point.map(|p| format!(" at point {p}")).unwrap_or_default())]
    NonPositiveLapse { lapse: f64, point: Option<usize> },

    #[error("time step {dt:e} violates the stability guard dt <= {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("evolution halted at step {step}: {reason}")]
    EvolutionHalted { step: usize, reason: String },

    #[error("invalid smearing spec '{spec}': {reason}")]
    Smearing { spec: String, reason: String },

    #[error("bundle parse error at byte {offset}: {message}")]
    BundleParse { offset: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
