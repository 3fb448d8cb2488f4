use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {max_asymmetry:e}")]
    NonSymmetric { max_asymmetry: f64 },

    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("row {index} has zero norm")]
    ZeroRow { index: usize },

    #[error("spectrum has no eigenvalue above {threshold:e}")]
    DegenerateSpectrum { threshold: f64 },

    #[error("need at least 2 live columns, found {live}")]
    TooFewColumns { live: usize },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("non-finite value {what}")]
    NonFinite { what: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("non-rectangular input at line {line}: expected {expected} columns, found {found}")]
    NonRectangular {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonSymmetric { .. } => "non_symmetric",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Shape(_) => "shape",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::ZeroRow { .. } => "zero_row",
            Error::DegenerateSpectrum { .. } => "degenerate_spectrum",
            Error::TooFewColumns { .. } => "too_few_columns",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::NonFinite { .. } => "non_finite",
            Error::Parse { .. } => "parse",
            Error::NonRectangular { .. } => "non_rectangular",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
