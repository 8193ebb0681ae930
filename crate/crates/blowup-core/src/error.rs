use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("mode index {m} exceeds configured maximum {m_max}")]
    ModeOutOfBounds { m: usize, m_max: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("profile undefined at (y={y}, s={s}): 1 + e^-s P(y) = {value} <= 0")]
    ProfileDomain { y: f64, s: f64, value: f64 },

    #[error("u* is singular at xi = 0")]
    Singularity,

    #[error(
        "quadrature inconsistency: Parseval radicand {radicand} below -tolerance (norm^2 = {norm_sq}); increase the order"
    )]
    QuadratureInconsistency { radicand: f64, norm_sq: f64 },

    #[error("initial data bracket {value} < 1/4 at grid node {node} (y = {y})")]
    Initialization { node: usize, y: f64, value: f64 },

    #[error("frame conversion requires t < T, got t = {t}, T = {t_blowup}")]
    FrameTime { t: f64, t_blowup: f64 },

    #[error("requested point {value} outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("step size underflow near blow-up (dt = {dt} at t = {t})")]
    BlowupProximity { dt: f64, t: f64 },

    #[error("trajectory shows no blow-up (sup-norm growth factor {growth} < 10)")]
    NotBlowingUp { growth: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid bisection bracket: both endpoints exit with the same signature ({0})")]
    InvalidBracket(String),

    #[error("no exit observed before s = {s_probe}")]
    NoExit { s_probe: f64 },

    #[error("samples outside (0, kappa): not in the basin of the heteroclinic orbit")]
    NotInBasin,

    #[error("annulus unresolved: {0}")]
    InsufficientResolution(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
