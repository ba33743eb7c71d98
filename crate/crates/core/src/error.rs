use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at grid point {point}")]
    NonFinite { point: usize },

    #[error("non-positive determinant {det:e} at grid point {point}")]
    NonPositiveDeterminant { point: usize, det: f64 },

    #[error("singular or non-positive metric at grid point {point}")]
    SingularMetric { point: usize },

    #[error("zero direction vector")]
    ZeroDirection,

    #[error("positivity lost at t = {t} (grid point {point}, min eigenvalue {min_eig:e})")]
    PositivityLost { t: f64, point: usize, min_eig: f64 },

    #[error("Newton diverged at t = {t}: residual {residual:e} did not decrease")]
    NewtonDiverged { t: f64, residual: f64 },

    #[error("iteration limit reached after {iterations} iterations (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("insufficient data: need {needed} entries, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed field file: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short machine-readable tag, used in CSV status columns and reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::NonPositiveDeterminant { .. } => "non_positive_determinant",
            Error::SingularMetric { .. } => "singular_metric",
            Error::ZeroDirection => "zero_direction",
            Error::PositivityLost { .. } => "positivity_lost",
            Error::NewtonDiverged { .. } => "newton_diverged",
            Error::IterationLimit { .. } => "iteration_limit",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}
