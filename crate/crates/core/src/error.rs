use thiserror::Error;

/// Errors raised by the frame, quadrature and metric engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} violated: max deviation {defect:.3e} exceeds {tolerance:.1e}")]
    ConstraintViolation {
        what: &'static str,
        defect: f64,
        tolerance: f64,
    },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {defect:.3e})")]
    NonHermitian { defect: f64 },

    #[error("Gram matrix of the Hermitian basis is singular")]
    SingularGram,

    #[error("invalid Hermitian basis: {0}")]
    InvalidBasis(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("integrand returned a non-finite value at {location:?}")]
    PoisonedEvaluation { location: Vec<f64> },

    #[error("evaluation point {point:?} lies outside the chart")]
    OutOfChart { point: Vec<f64> },

    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),

    #[error("scale rho = {rho} is below the minimum {min} (singular instanton limit)")]
    ScaleBelowMinimum { rho: f64, min: f64 },

    #[error("NR positivity bound violated ({bound:.3e} >= {limit:.3e}); try phase scale >= {suggested}")]
    NrPositivity {
        bound: f64,
        limit: f64,
        suggested: f64,
    },

    #[error("decomposition residual {residual:.3e} above tolerance")]
    DecompositionResidual { residual: f64 },

    #[error("connection does not vanish on the chart margin (max |A| = {max_abs:.3e})")]
    DecayViolation { max_abs: f64 },

    #[error("abelian profile constants invalid: {0}")]
    InvalidProfiles(String),

    #[error("incompatible moduli labels: {0}")]
    IncompatibleLabels(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
