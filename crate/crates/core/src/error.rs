use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension n = {0} (supported range 1..=4)")]
    UnsupportedDimension(usize),

    #[error("invalid connection descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("lattice spacing a = 1/{size} is not below the stripe width {stripe}")]
    SpacingTooCoarse { size: usize, stripe: f64 },

    #[error("plaquette phase {phase} at site {site} is too close to the branch cut")]
    RoughField { site: usize, phase: f64 },

    #[error("gauge transformation at site {site} is not unitary (deviation {deviation:e})")]
    NonUnitaryGauge { site: usize, deviation: f64 },

    #[error("link at site {site}, direction {direction} is not unitary (deviation {deviation:e})")]
    NonUnitaryLink {
        site: usize,
        direction: usize,
        deviation: f64,
    },

    #[error("operation requires an even dimension with a chirality operator, got n = {0}")]
    OddDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("background not supported here: {0}")]
    UnsupportedBackground(String),

    #[error("perturbation mode {mode} exceeds half the cutoff K = {cutoff}")]
    RoughBackground { mode: i64, cutoff: usize },

    #[error("ambiguous kernel: {0}")]
    AmbiguousKernel(String),

    #[error("near-zero eigenvalue {min_abs:e}: eta invariant is ill-defined")]
    NearZeroMode { min_abs: f64 },

    #[error("operator has a near-zero eigenvalue {min_abs:e} at endpoint m = {mass}")]
    EndpointKernel { mass: f64, min_abs: f64 },

    #[error("spectral flow methods disagree: crossing count {crossing}, eta difference {eta}")]
    MethodMismatch { crossing: i64, eta: i64 },

    #[error("could not certify a spectral level on [{lo}, {hi}] after maximal refinement")]
    UnresolvedInterval { lo: f64, hi: f64 },

    #[error("sign function undefined: min |eigenvalue| = {min_abs:e}")]
    SignUndefined { min_abs: f64 },

    #[error("trace {trace} is not an integer (residual {residual:e})")]
    NonIntegerTrace { trace: f64, residual: f64 },

    #[error("quadrature needs at least 8 points per cell per axis, got {0}")]
    QuadratureTooCoarse(usize),

    #[error("combined operator gap closed: min |eig| = {gap:e} at m = {mass}, t = {t}")]
    GapClosed { mass: f64, t: f64, gap: f64 },

    #[error("invalid mass grid: {0}")]
    InvalidGrid(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
