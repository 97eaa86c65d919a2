use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {requested} exceeds supported order {supported}")]
    OrderExceeded { requested: usize, supported: usize },

    #[error("coordinate {axis} = {value} lies outside [{lo}, {hi}]")]
    PointOutsideDomain {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("chart mismatch: expected `{expected}`, found `{found}`")]
    ChartMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        point: Vec<f64>,
        min_eigenvalue: f64,
    },

    #[error("map is not an isometry: metric deviation {deviation:e} exceeds {tolerance:e}")]
    NotAnIsometry { deviation: f64, tolerance: f64 },

    #[error("isometry check failed: metric deviation {deviation:e} exceeds {tolerance:e}")]
    IsometryCheckFailed { deviation: f64, tolerance: f64 },

    #[error("invalid contraction schedule: {0}")]
    ScheduleInvalid(String),

    #[error("grid too coarse: refinement estimate {estimate:e} exceeds {tolerance:e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("spatial jacobian is singular (condition number {condition:e})")]
    JacobianSingular { condition: f64 },

    #[error("finite-difference step too small: rounding estimate {noise:e} dominates")]
    StepTooSmall { noise: f64 },

    #[error("denominator below threshold at every sample")]
    DenominatorBelowThreshold,

    #[error("deck transformation is not an isometry (deviation {deviation:e})")]
    DeckNotIsometry { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("corrupt cache header: {0}")]
    CorruptHeader(String),

    #[error("cache hash mismatch: {0}")]
    HashMismatch(String),

    #[error("truncated cache payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("worker failure: {0}")]
    Worker(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
