use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid is not symmetric about the origin on axis {axis}: [{lo}, {hi}]")]
    NotOriginCentered { axis: usize, lo: f64, hi: f64 },

    #[error("requested volume {requested} exceeds grid volume {available}")]
    VolumeTooLarge { requested: f64, available: f64 },

    #[error("brute-force guard exceeded: {reason} (estimated {evaluations:.3e} evaluations)")]
    GuardExceeded { reason: String, evaluations: f64 },

    #[error("hypothesis violated: variable {index} has ess sup {ess_sup} > bound {bound}")]
    HypothesisViolated {
        index: usize,
        ess_sup: f64,
        bound: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidDensity(_) => "invalid_density",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NotOriginCentered { .. } => "not_origin_centered",
            Error::VolumeTooLarge { .. } => "volume_too_large",
            Error::GuardExceeded { .. } => "guard_exceeded",
            Error::HypothesisViolated { .. } => "hypothesis_violated",
            Error::Infeasible(_) => "infeasible",
            Error::Precondition(_) => "precondition",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}
