use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The density proposed as an invariant measure is not strictly positive.
    #[error("invalid invariant measure: sigma = {value} at {point:?}")]
    InvalidMeasure { point: Vec<f64>, value: f64 },

    #[error("invalid field family: {0}")]
    InvalidFamily(String),

    #[error("invalid periodic cell map: {reason} at {point:?}")]
    InvalidCellMap { point: Vec<f64>, reason: String },

    /// Non-finite state produced while integrating a trajectory.
    #[error("trajectory blow-up at t = {time}")]
    BlowUp { time: f64 },

    #[error("step-halving check failed: discrepancy {discrepancy:e} exceeds {tolerance:e}")]
    Richardson { discrepancy: f64, tolerance: f64 },

    #[error("integration box too small: domain of dependence needs radius {required_radius}")]
    TruncatedDomain { required_radius: f64 },

    #[error("invalid effective coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("cell resolution insufficient: quasi-affinity residual {residual:e} at m = {resolution}")]
    InsufficientResolution { residual: f64, resolution: usize },

    /// A sampled hypothesis on the generating field of a flow family failed.
    #[error("flow hypothesis '{condition}' violated at {sample:?}: {value} > {limit}")]
    HypothesisViolation {
        condition: &'static str,
        sample: Vec<f64>,
        value: f64,
        limit: f64,
    },

    #[error("config error (line {line}, key '{key}'): {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
