use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {z} is within {radius:e} of a lattice point (tau = {tau})")]
    Pole { z: Complex64, tau: Complex64, radius: f64 },

    #[error("pole error at stacking index k = {k}: {source}")]
    PoleAt {
        k: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("invalid lattice modulus {0}: Im(tau) must be positive")]
    InvalidTau(Complex64),

    #[error("unknown catalog name `{name}`; valid names: {valid}")]
    UnknownCatalog { name: String, valid: String },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("chart error: {0}")]
    Chart(String),

    #[error("order {n} exceeds the truncation order N_max = {n_max}")]
    OrderOverflow { n: usize, n_max: usize },

    #[error("fixed-point map is not contracting (update ratio {ratio:.3e} at t = {t})")]
    NonContraction { t: f64, ratio: f64 },

    #[error("zero of the Gauss map on the integration contour of torus {k} (|g| = {value:e})")]
    ZeroOnContour { k: i64, value: f64 },

    #[error("Newton step failed at t = {t} (residual {residual:.3e}); retry with a t-step below {suggested_step}")]
    StepFailure { t: f64, residual: f64, suggested_step: f64 },

    #[error("loop residual {residual:.3e} on torus {k} exceeds tolerance")]
    LoopResidual { k: i64, residual: f64 },

    #[error("Laurent tail estimate {estimate:.3e} for neck {k} exceeds tolerance")]
    CoefficientDecay { k: i64, estimate: f64 },

    #[error("degenerate fit: all differences below {floor:e}")]
    DegenerateFit { floor: f64 },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches the stacking index to errors raised on a single torus.
    pub fn at_index(self, k: i64) -> Error {
        match self {
            e @ Error::Pole { .. } => Error::PoleAt { k, source: Box::new(e) },
            Error::ZeroOnContour { value, .. } => Error::ZeroOnContour { k, value },
            e => e,
        }
    }
}
