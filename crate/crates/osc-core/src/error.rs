//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OscError {
    #[error("invalid interval: lo = {lo}, hi = {hi} (need finite lo < hi)")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {x} outside function domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: {detail}")]
    QuadratureFailed { a: f64, b: f64, detail: String },

    #[error("step function has {got} breakpoints, oracle limit is {limit}")]
    TooManyBreakpoints { got: usize, limit: usize },

    #[error("no reverse Holder exponent in the ladder is feasible: {0}")]
    NoFeasibleEta(String),

    #[error("no A1 membership found for any probed mu (largest tried: {largest_mu}); \
             the function is not in BLO numerically")]
    NoMembership { largest_mu: f64 },

    #[error("decomposition factor b left (0, 1]: {detail}")]
    FactorOutOfBounds { detail: String },

    #[error("config parse error at line {line}: {detail}")]
    ConfigParse { line: usize, detail: String },

    #[error("expression parse error: {0}")]
    ExprParse(String),

    #[error("mollifier width {eps} too large for interval of length {len}")]
    EpsTooLarge { eps: f64, len: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, OscError>;
