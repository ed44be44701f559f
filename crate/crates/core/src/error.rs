use thiserror::Error;

/// Errors produced by the geometry, flow, spectral and verification kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("degenerate mesh: element {element} has area {area:e} (threshold {threshold:e})")]
    DegenerateMesh { element: usize, area: f64, threshold: f64 },

    #[error("curvature collapse at vertex {vertex}: H = {h:e} <= floor {floor:e} (t = {t})")]
    CurvatureCollapse { vertex: usize, h: f64, floor: f64, t: f64 },

    #[error("star-shape lost at vertex {vertex}: r = {r:e} (t = {t})")]
    StarShapeLoss { vertex: usize, r: f64, t: f64 },

    #[error("numerical blow-up at t = {t}: {what}")]
    NumericalBlowup { t: f64, what: String },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("solver failure: {reason} (residual {residual:e})")]
    SolverFailure { reason: String, residual: f64 },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("data error: {0}")]
    DataError(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
