use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("nonpositive rate: {0} must be > 0")]
    NonPositiveRate(&'static str),
    #[error("plane-wave packets are not normalizable; probabilities are undefined")]
    PlaneWaveProbability,
    #[error("transmission coefficient degenerate: delta = 0 and gamma_eff = 0")]
    DegenerateCoefficient,
    #[error("complex erf argument |z| = {0:.3} outside safe range |z| <= {1}")]
    RangeExceeded(f64, f64),
    #[error("enumeration over {n} coordinates exceeds cap {cap}")]
    EnumerationCapExceeded { n: usize, cap: usize },
    #[error("quadrature did not converge: error estimate {err:.3e} > tolerance {tol:.3e}")]
    QuadratureNotConverged { err: f64, tol: f64 },
    #[error("coherent-state truncation too severe: discarded tail mass {0:.3e} > 1e-6")]
    TruncationTooSevere(f64),
    #[error("oracle dimension guard: {0}")]
    DimensionGuard(String),
    #[error("mode window covers only {coverage:.6} of the packet's spectral weight (need >= {required})")]
    WindowCoverage { coverage: f64, required: f64 },
    #[error("requested horizon {t_max:.3} exceeds wrap time {wrap:.3} of the discrete ring")]
    WrapTimeExceeded { t_max: f64, wrap: f64 },
    #[error("oracle norm drift {0:.3e} exceeds 1e-9")]
    NormDrift(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal conditions attached to a validated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warning {
    /// `v_g * kappa > gamma`: the Lorentzian kernel grows exponentially in
    /// time and probabilities are only meaningful on bounded horizons.
    WidthExceedsLinewidth,
}
